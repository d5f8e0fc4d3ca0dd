"""Dataset construction: lifting, control sampling, noise, and windowing.

A dataset is one long simulated trajectory mapped into a higher-dimensional
observation space by a fixed orthonormal linear lift, optionally corrupted
by white Gaussian noise at a prescribed SNR. Training consumes the first
``n_train`` samples through overlapping windows (see :func:`window_plan`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import ControlAffineSystem, simulate
from .errors import ConfigError

__all__ = [
    "LiftMap",
    "Dataset",
    "make_lift",
    "lift",
    "unlift",
    "random_piecewise_control",
    "add_noise",
    "build_dataset",
    "window_plan",
    "save_dataset",
    "load_dataset",
]

DATASET_SCHEMA = "tcblran/dataset-v1"


@dataclass(frozen=True)
class LiftMap:
    """Orthonormal linear embedding of the state space.

    ``q`` has shape (lifted_dim, state_dim) with orthonormal columns, so
    ``q.T @ q == I`` and ``unlift(lift(x)) == x`` up to rounding.
    """

    q: np.ndarray
    seed: int

    def __post_init__(self):
        if self.q.ndim != 2 or self.q.shape[0] < self.q.shape[1]:
            raise ValueError(f"lift matrix shape {self.q.shape} must be tall")

    @property
    def state_dim(self) -> int:
        return self.q.shape[1]

    @property
    def lifted_dim(self) -> int:
        return self.q.shape[0]


def make_lift(seed: int, state_dim: int, lifted_dim: int) -> LiftMap:
    """Draw a seeded random orthonormal lift via thin QR.

    Signs are fixed so the R factor has a nonnegative diagonal, which makes
    the map a deterministic function of the seed alone.
    """
    if lifted_dim < state_dim:
        raise ValueError(f"lifted_dim {lifted_dim} < state_dim {state_dim}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((lifted_dim, state_dim))
    q, r = np.linalg.qr(g, mode="reduced")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return LiftMap(q=q * signs, seed=seed)


def lift(lift_map: LiftMap, x: np.ndarray) -> np.ndarray:
    """Map states (last axis = state_dim) into the lifted space."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != lift_map.state_dim:
        raise ValueError(f"state dim {x.shape[-1]} != {lift_map.state_dim}")
    return x @ lift_map.q.T


def unlift(lift_map: LiftMap, xt: np.ndarray) -> np.ndarray:
    """Project lifted states (last axis = lifted_dim) back down."""
    xt = np.asarray(xt, dtype=np.float64)
    if xt.shape[-1] != lift_map.lifted_dim:
        raise ValueError(f"lifted dim {xt.shape[-1]} != {lift_map.lifted_dim}")
    return xt @ lift_map.q


def random_piecewise_control(seed, n_steps: int, lo: float = -0.15,
                             hi: float = 0.15, input_dim: int = 1) -> np.ndarray:
    """Sample a piecewise-constant control sequence, one draw per step.

    Values are i.i.d. uniform on [lo, hi]; returns shape (n_steps, input_dim).
    ``seed`` may be an int or a sequence of ints.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if hi < lo:
        raise ValueError(f"empty control range [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=(n_steps, input_dim))


def add_noise(states: np.ndarray, snr_db: float, seed) -> np.ndarray:
    """Add white Gaussian noise at the given signal-to-noise ratio.

    Signal power is the mean squared entry of ``states`` over the whole
    array; the noise variance is power / 10^(snr_db / 10).
    """
    states = np.asarray(states, dtype=np.float64)
    if states.size == 0:
        raise ValueError("cannot add noise to an empty array")
    power = float(np.mean(states ** 2))
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    return states + sigma * rng.standard_normal(states.shape)


@dataclass
class Dataset:
    """One simulated trajectory in lifted coordinates, ready for training.

    ``lifted_states`` is the training view (noisy when snr_db is set);
    ``clean_states`` keeps the noise-free lift for evaluation initial
    conditions. Both have shape (n_samples, lifted_dim); ``controls`` has
    shape (n_samples - 1, input_dim).
    """

    lift_map: LiftMap
    clean_states: np.ndarray
    lifted_states: np.ndarray
    controls: np.ndarray
    dt: float
    n_train: int
    snr_db: float | None
    noise_seed: int
    control_seed: int
    system_name: str
    x0: np.ndarray

    def __post_init__(self):
        if len(self.lifted_states) != len(self.controls) + 1:
            raise ValueError("need len(lifted_states) == len(controls) + 1")
        if self.clean_states.shape != self.lifted_states.shape:
            raise ValueError("clean/lifted state shapes differ")
        if not 1 <= self.n_train <= len(self.lifted_states):
            raise ConfigError(
                f"n_train={self.n_train} outside [1, {len(self.lifted_states)}]")

    @property
    def n_samples(self) -> int:
        return len(self.lifted_states)


def window_plan(n_train: int, m: int, k_m: int, k_tm: int) -> tuple[int, list[int]]:
    """Plan training windows of m + k_m + k_tm consecutive samples.

    Returns ``(m_eff, starts)``. When the first n_train samples fit at
    least one full window (n_train >= m + k_m + k_tm), m_eff == m and
    starts enumerates every stride-1 window start. Otherwise the batch
    size is shrunk to m_eff = n_train - k_m - k_tm and a single window
    starting at 0 covers the whole training slice; if even that leaves
    m_eff <= k_tm the configuration is rejected.
    """
    if min(n_train, m, k_m) < 1 or k_tm < 2:
        raise ConfigError("window_plan needs n_train, m, k_m >= 1 and k_tm >= 2")
    window = m + k_m + k_tm
    if n_train >= window:
        return m, list(range(n_train - window + 1))
    m_eff = n_train - k_m - k_tm
    if m_eff <= k_tm:
        raise ConfigError(
            f"n_train={n_train} cannot satisfy the window requirement "
            f"m + k_m + k_tm = {window} even with a reduced batch: need "
            f"n_train - k_m - k_tm > k_tm, i.e. n_train > {k_m + 2 * k_tm}")
    return m_eff, [0]


def build_dataset(system: ControlAffineSystem, *, lift_seed: int,
                  control_seed: int, n_train: int, snr_db: float | None = None,
                  noise_seed: int = 0, dt: float = 0.1, t_span: float = 220.0,
                  x0: Sequence[float] = (0.8, 0.0), lift_dim: int = 64,
                  control_range: tuple[float, float] = (-0.15, 0.15)) -> Dataset:
    """Simulate one trajectory and lift it into observation space.

    The number of stored samples is round(t_span / dt); the default span
    [0, 220] at dt = 0.1 stores 2200 samples. Noise, when requested, is
    added after lifting so the SNR is measured in the lifted space.
    """
    if dt <= 0 or t_span <= 0:
        raise ConfigError("dt and t_span must be positive")
    n_samples = int(round(t_span / dt))
    if n_samples < 2:
        raise ConfigError(f"t_span={t_span} too short for dt={dt}")
    if not 1 <= n_train <= n_samples:
        raise ConfigError(f"n_train={n_train} outside [1, {n_samples}]")
    x0 = np.asarray(x0, dtype=np.float64)
    controls = random_piecewise_control(control_seed, n_samples - 1,
                                        control_range[0], control_range[1],
                                        system.input_dim)
    traj = simulate(system, x0, controls, dt)
    lift_map = make_lift(lift_seed, system.state_dim, lift_dim)
    clean = lift(lift_map, traj.states)
    if snr_db is None:
        view = clean.copy()
    else:
        view = add_noise(clean, snr_db, noise_seed)
    return Dataset(lift_map=lift_map, clean_states=clean, lifted_states=view,
                   controls=traj.controls, dt=dt, n_train=n_train,
                   snr_db=snr_db, noise_seed=noise_seed,
                   control_seed=control_seed, system_name=system.name, x0=x0)


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset to an .npz file with an embedded schema tag."""
    meta = {
        "schema": DATASET_SCHEMA,
        "system": dataset.system_name,
        "dt": dataset.dt,
        "n_train": dataset.n_train,
        "snr_db": dataset.snr_db,
        "noise_seed": dataset.noise_seed,
        "control_seed": dataset.control_seed,
        "lift_seed": dataset.lift_map.seed,
    }
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             q=dataset.lift_map.q, clean_states=dataset.clean_states,
             lifted_states=dataset.lifted_states, controls=dataset.controls,
             x0=dataset.x0)


def load_dataset(path) -> Dataset:
    """Read a dataset written by :func:`save_dataset`; exact round trip."""
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("schema") != DATASET_SCHEMA:
            raise ConfigError(f"unsupported dataset schema {meta.get('schema')!r}")
        lift_map = LiftMap(q=z["q"], seed=int(meta["lift_seed"]))
        snr = meta["snr_db"]
        return Dataset(lift_map=lift_map, clean_states=z["clean_states"],
                       lifted_states=z["lifted_states"], controls=z["controls"],
                       dt=float(meta["dt"]), n_train=int(meta["n_train"]),
                       snr_db=None if snr is None else float(snr),
                       noise_seed=int(meta["noise_seed"]),
                       control_seed=int(meta["control_seed"]),
                       system_name=str(meta["system"]), x0=z["x0"])
