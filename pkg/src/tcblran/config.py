"""Experiment configuration: presets, file parsing, and overrides.

Config values travel as flat dotted keys ("trainer.lr0", "weights.k_m").
A config file holds one ``key = value`` assignment per line with ``#``
comments. Presets exist for every benchmark x noise x model combination
and can be refined by a file and/or explicit overrides, in that order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .evaluation import EvalConfig
from .losses import LossWeights
from .model import Architecture
from .training import TrainerConfig

__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "preset_names",
    "parse_config",
    "config_to_flat",
]

MODEL_KINDS = ("tcblran", "blran")
SYSTEM_NAMES = ("pendulum", "vanderpol", "duffing")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs: data, model, losses, training, eval.

    Per training seed s, the dataset control and noise streams are seeded
    by 2_000_000 + s and 3_000_000 + s, so the two draws never share a
    stream while remaining a pure function of s.
    """

    system: str
    model: str
    dt: float = 0.1
    t_span: float = 220.0
    x0: tuple[float, ...] = (0.8, 0.0)
    lift_dim: int = 64
    lift_seed: int = 0
    n_train: int = 32
    snr_db: float | None = None
    seeds: tuple[int, ...] = tuple(range(10))
    out_dir: str | None = None
    arch: Architecture = field(default_factory=Architecture)
    weights: LossWeights = field(default_factory=LossWeights)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        if self.system not in SYSTEM_NAMES:
            raise ConfigError(f"unknown system {self.system!r}; "
                              f"choose from {SYSTEM_NAMES}")
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}; "
                              f"choose from {MODEL_KINDS}")
        if self.model == "blran" and self.weights.gamma_tc != 0.0:
            raise ConfigError("model 'blran' requires weights.gamma_tc = 0")
        if self.model == "tcblran" and self.weights.gamma_tc <= 0.0:
            raise ConfigError("model 'tcblran' requires weights.gamma_tc > 0")
        if self.trainer.batch_size != self.weights.batch_size:
            raise ConfigError("trainer.batch_size must equal weights.batch_size")
        if self.arch.input_dim != self.lift_dim:
            raise ConfigError(f"arch.input_dim={self.arch.input_dim} must equal "
                              f"lift_dim={self.lift_dim}")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.dt <= 0 or self.t_span <= 0:
            raise ConfigError("dt and t_span must be positive")


def _parse_float_or_none(text: str):
    if text.lower() in ("none", "clean", "null"):
        return None
    return float(text)


def _parse_float_tuple(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_str_or_none(text: str):
    return None if text.lower() in ("none", "null") else text


# key -> parser applied to the raw string value. Typed values pass through.
_KEY_PARSERS = {
    "system": str,
    "model": str,
    "dt": float,
    "t_span": float,
    "x0": _parse_float_tuple,
    "lift_dim": int,
    "lift_seed": int,
    "n_train": int,
    "snr_db": _parse_float_or_none,
    "seeds": _parse_int_tuple,
    "out_dir": _parse_str_or_none,
    "arch.latent_dim": int,
    "arch.encoder_hidden": int,
    "arch.decoder_hidden": int,
    "weights.gamma_id": float,
    "weights.gamma_fwd": float,
    "weights.gamma_tc": float,
    "weights.k_m": int,
    "weights.k_tm": int,
    "trainer.lr0": float,
    "trainer.lr_decay": float,
    "trainer.milestones": _parse_int_tuple,
    "trainer.weight_decay": float,
    "trainer.grad_clip": float,
    "trainer.epochs": int,
    "batch_size": int,
    "eval.horizon": float,
    "eval.n_ics": int,
    "eval.control_seed": int,
    "eval.control_lo": float,
    "eval.control_hi": float,
}

_REQUIRED_KEYS = ("system", "model")

# Table of benchmark presets: (n_train, hidden, k_m, batch) per system and
# (weight_decay, gamma_fwd, gamma_tc) per system x noise x model.
_SYSTEM_SHAPE = {
    "pendulum": {"n_train": 32, "hidden": 128, "k_m": 12, "batch": 32},
    "vanderpol": {"n_train": 256, "hidden": 192, "k_m": 32, "batch": 64},
    "duffing": {"n_train": 32, "hidden": 128, "k_m": 12, "batch": 32},
}

_VARIANTS = {
    ("pendulum", None, "tcblran"): (0.1, 1.0, 2.0),
    ("pendulum", None, "blran"): (0.01, 2.0, 0.0),
    ("pendulum", 20.0, "tcblran"): (1.0, 0.5, 0.5),
    ("pendulum", 20.0, "blran"): (1.0, 0.5, 0.0),
    ("vanderpol", None, "tcblran"): (1.0, 1.0, 0.01),
    ("vanderpol", None, "blran"): (1.0, 1.0, 0.0),
    ("vanderpol", 20.0, "tcblran"): (1.0, 2.0, 2.0),
    ("vanderpol", 20.0, "blran"): (1.0, 1.0, 0.0),
    ("duffing", None, "tcblran"): (0.01, 2.0, 0.5),
    ("duffing", None, "blran"): (0.1, 2.0, 0.0),
    ("duffing", 20.0, "tcblran"): (1.0, 2.0, 0.5),
    ("duffing", 20.0, "blran"): (1.0, 2.0, 0.0),
}

_SHORT = {"pendulum": "pendulum", "vanderpol": "vdp", "duffing": "duffing"}


def _build_presets() -> dict[str, dict[str, str]]:
    presets = {}
    for (system, snr, model), (wd, g_fwd, g_tc) in _VARIANTS.items():
        shape = _SYSTEM_SHAPE[system]
        tag = "clean" if snr is None else f"{int(snr)}db"
        name = f"{_SHORT[system]}-{tag}-{model}"
        presets[name] = {
            "system": system,
            "model": model,
            "n_train": str(shape["n_train"]),
            "snr_db": "none" if snr is None else str(snr),
            "arch.encoder_hidden": str(shape["hidden"]),
            "arch.decoder_hidden": str(shape["hidden"]),
            "weights.k_m": str(shape["k_m"]),
            "batch_size": str(shape["batch"]),
            "trainer.weight_decay": str(wd),
            "weights.gamma_fwd": str(g_fwd),
            "weights.gamma_tc": str(g_tc),
        }
    return presets


PRESETS = _build_presets()


def preset_names() -> list[str]:
    return sorted(PRESETS)


def _read_config_file(path) -> dict[str, str]:
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _coerce(raw: dict[str, str]) -> dict:
    values = {}
    for key, text in raw.items():
        if key not in _KEY_PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _KEY_PARSERS[key](text) if isinstance(text, str) else text
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {key!r}: {text!r}") from None
    return values


def parse_config(preset: str | None = None, path=None,
                 overrides: dict[str, str] | list[str] | None = None) -> ExperimentConfig:
    """Assemble a config from preset defaults, an optional file, and overrides.

    ``overrides`` may be a mapping of flat keys to value strings or a list
    of ``key=value`` strings as passed on the command line.
    """
    raw: dict[str, str] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; "
                              f"available: {', '.join(preset_names())}")
        raw.update(PRESETS[preset])
    if path is not None:
        raw.update(_read_config_file(path))
    if overrides:
        if isinstance(overrides, dict):
            raw.update(overrides)
        else:
            for item in overrides:
                if "=" not in item:
                    raise ConfigError(f"override {item!r} is not of the form key=value")
                key, value = item.split("=", 1)
                raw[key.strip()] = value.strip()
    missing = [k for k in _REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"missing required config keys: {', '.join(missing)}")
    values = _coerce(raw)
    for key in ("x0", "seeds", "trainer.milestones"):
        if key in values:
            values[key] = tuple(values[key])
    batch = values.pop("batch_size", None)

    def section(prefix, **extra):
        out = {k.split(".", 1)[1]: v for k, v in values.items()
               if k.startswith(prefix + ".")}
        out.update(extra)
        return out

    top = {k: v for k, v in values.items() if "." not in k}
    arch_kwargs = section("arch", input_dim=values.get("lift_dim", 64))
    weights_kwargs = section("weights")
    trainer_kwargs = section("trainer")
    if batch is not None:
        weights_kwargs["batch_size"] = batch
        trainer_kwargs["batch_size"] = batch
    try:
        return ExperimentConfig(arch=Architecture(**arch_kwargs),
                                weights=LossWeights(**weights_kwargs),
                                trainer=TrainerConfig(**trainer_kwargs),
                                eval=EvalConfig(**section("eval")), **top)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def config_to_flat(config: ExperimentConfig) -> dict:
    """Flat-key echo of a config, suitable for JSON and for parse_config."""
    flat = {
        "system": config.system,
        "model": config.model,
        "dt": config.dt,
        "t_span": config.t_span,
        "x0": list(config.x0),
        "lift_dim": config.lift_dim,
        "lift_seed": config.lift_seed,
        "n_train": config.n_train,
        "snr_db": config.snr_db,
        "seeds": list(config.seeds),
        "out_dir": config.out_dir,
        "arch.latent_dim": config.arch.latent_dim,
        "arch.encoder_hidden": config.arch.encoder_hidden,
        "arch.decoder_hidden": config.arch.decoder_hidden,
        "weights.gamma_id": config.weights.gamma_id,
        "weights.gamma_fwd": config.weights.gamma_fwd,
        "weights.gamma_tc": config.weights.gamma_tc,
        "weights.k_m": config.weights.k_m,
        "weights.k_tm": config.weights.k_tm,
        "batch_size": config.weights.batch_size,
        "trainer.lr0": config.trainer.lr0,
        "trainer.lr_decay": config.trainer.lr_decay,
        "trainer.milestones": list(config.trainer.milestones),
        "trainer.weight_decay": config.trainer.weight_decay,
        "trainer.grad_clip": config.trainer.grad_clip,
        "trainer.epochs": config.trainer.epochs,
        "eval.horizon": config.eval.horizon,
        "eval.n_ics": config.eval.n_ics,
        "eval.control_seed": config.eval.control_seed,
        "eval.control_lo": config.eval.control_lo,
        "eval.control_hi": config.eval.control_hi,
    }
    return flat
