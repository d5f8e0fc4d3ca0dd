"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when a configuration value is missing, unknown, or inconsistent."""


class NumericError(ArithmeticError):
    """Raised when a numerical computation produces non-finite values.

    Carries enough context (message text) to locate the failing stage,
    e.g. the epoch and batch index during training.
    """
