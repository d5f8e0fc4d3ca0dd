"""Control-affine benchmark systems and fixed-step RK4 simulation.

Systems have the form ``dx/dt = f(x) + G(x) u`` with a zero-order-hold
input: ``u`` is constant over each integration step of length ``dt``.
Three second-order benchmarks ship registered under the names
``pendulum``, ``vanderpol``, and ``duffing``; additional systems can be
added with :func:`register_system`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import NumericError

__all__ = [
    "ControlAffineSystem",
    "Trajectory",
    "register_system",
    "make_system",
    "vector_field",
    "rk4_step",
    "simulate",
]


@dataclass(frozen=True)
class ControlAffineSystem:
    """A named control-affine system with fixed real parameters.

    The drift and control vector fields are looked up in the module
    registry by ``name``; ``params`` feeds the registered callables.
    """

    name: str
    params: Mapping[str, float] = field(default_factory=dict)
    state_dim: int = 2
    input_dim: int = 1

    def __post_init__(self):
        if self.name not in _REGISTRY:
            raise ValueError(f"unknown system {self.name!r}; registered: {sorted(_REGISTRY)}")
        if self.state_dim < 1 or self.input_dim < 1:
            raise ValueError("state_dim and input_dim must be positive")


@dataclass(frozen=True)
class Trajectory:
    """States and the zero-order-hold controls that produced them.

    ``states`` has one more row than ``controls``: states[k+1] is reached
    from states[k] under controls[k] over one step of length ``dt``.
    """

    states: np.ndarray
    controls: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.states.ndim != 2 or self.controls.ndim != 2:
            raise ValueError("states and controls must be 2-d arrays")
        if len(self.states) != len(self.controls) + 1:
            raise ValueError(
                f"need len(states) == len(controls) + 1, got "
                f"{len(self.states)} and {len(self.controls)}"
            )

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.states))


# Registry entries: (drift(x, params) -> (d,), control_matrix(x, params) -> (d, m)).
_REGISTRY: dict[str, tuple[Callable, Callable, int, int]] = {}


def register_system(name: str, drift: Callable, control_matrix: Callable,
                    state_dim: int, input_dim: int) -> None:
    """Register a system so ControlAffineSystem(name, ...) can find it."""
    if name in _REGISTRY:
        raise ValueError(f"system {name!r} already registered")
    _REGISTRY[name] = (drift, control_matrix, state_dim, input_dim)


def make_system(name: str, **params: float) -> ControlAffineSystem:
    """Build a registered system, overriding selected default parameters."""
    if name not in _REGISTRY:
        raise ValueError(f"unknown system {name!r}; registered: {sorted(_REGISTRY)}")
    _, _, d, m = _REGISTRY[name]
    defaults = dict(_DEFAULT_PARAMS.get(name, {}))
    unknown = set(params) - set(defaults) if name in _DEFAULT_PARAMS else set()
    if unknown:
        raise ValueError(f"unknown parameters for {name!r}: {sorted(unknown)}")
    defaults.update(params)
    return ControlAffineSystem(name=name, params=defaults, state_dim=d, input_dim=m)


def vector_field(system: ControlAffineSystem, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Evaluate ``f(x) + G(x) u`` for one state and one input vector."""
    x = np.asarray(x, dtype=np.float64)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if x.shape != (system.state_dim,):
        raise ValueError(f"state shape {x.shape} != ({system.state_dim},)")
    if u.shape != (system.input_dim,):
        raise ValueError(f"input shape {u.shape} != ({system.input_dim},)")
    drift, control_matrix, _, _ = _REGISTRY[system.name]
    return drift(x, system.params) + control_matrix(x, system.params) @ u


def rk4_step(system: ControlAffineSystem, x: np.ndarray, u: np.ndarray,
             dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step with u held constant."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = vector_field(system, x, u)
    k2 = vector_field(system, x + 0.5 * dt * k1, u)
    k3 = vector_field(system, x + 0.5 * dt * k2, u)
    k4 = vector_field(system, x + dt * k3, u)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite state after RK4 step from x={x}")
    return out


def simulate(system: ControlAffineSystem, x0: np.ndarray, controls: np.ndarray,
             dt: float, t0: float = 0.0) -> Trajectory:
    """Integrate from ``x0`` under a zero-order-hold control sequence.

    Parameters
    ----------
    controls : array of shape (N, m) or (N,) when the system has one input.

    Returns
    -------
    Trajectory with N+1 states; states[0] is x0.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    controls = np.asarray(controls, dtype=np.float64)
    if controls.ndim == 1:
        controls = controls[:, None]
    if controls.ndim != 2 or controls.shape[1] != system.input_dim:
        raise ValueError(f"controls shape {controls.shape} incompatible with "
                         f"input_dim={system.input_dim}")
    if len(controls) == 0:
        raise ValueError("controls must be non-empty")
    n = len(controls)
    states = np.empty((n + 1, system.state_dim))
    states[0] = x0
    for k in range(n):
        try:
            states[k + 1] = rk4_step(system, states[k], controls[k], dt)
        except NumericError as exc:
            raise NumericError(f"simulation diverged at step {k}: {exc}") from exc
    return Trajectory(states=states, controls=controls.copy(), dt=dt, t0=t0)


def _pendulum_drift(x, p):
    return np.array([x[1], -(p["g"] / p["l"]) * np.sin(x[0])])


def _vanderpol_drift(x, p):
    return np.array([x[1], p["mu"] * (1.0 - x[0] ** 2) * x[1] - x[0]])


def _duffing_drift(x, p):
    return np.array([x[1], -p["delta"] * x[1] - p["alpha"] * x[0] - p["beta"] * x[0] ** 3])


def _second_order_control(x, p):
    # Actuation enters the velocity equation only.
    return np.array([[0.0], [1.0]])


_DEFAULT_PARAMS = {
    "pendulum": {"g": 9.8, "l": 1.0},
    "vanderpol": {"mu": 1.0},
    "duffing": {"alpha": -1.0, "beta": 1.0, "delta": 0.02},
}

register_system("pendulum", _pendulum_drift, _second_order_control, 2, 1)
register_system("vanderpol", _vanderpol_drift, _second_order_control, 2, 1)
register_system("duffing", _duffing_drift, _second_order_control, 2, 1)
