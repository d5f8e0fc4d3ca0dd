"""Rollout evaluation: relative prediction error against the true dynamics.

Each report rolls one trained model from the last ``n_ics`` training
samples under freshly drawn controls and measures the relative error in
the original state space after projecting the predictions back down.
Truth comes from RK4 for registered systems, or from the object's own
``propagate`` method for exactly-bilinear synthetic systems.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datagen import Dataset, random_piecewise_control, unlift
from .dynamics import ControlAffineSystem, simulate
from .errors import ConfigError, NumericError
from .model import ModelParams, decode, encode, rollout_latent

__all__ = [
    "EvalConfig",
    "EvalReport",
    "relative_error_series",
    "time_averaged_relative_error",
    "evaluate_model",
    "aggregate_seeds",
    "compare",
    "write_errors_csv",
    "read_errors_csv",
    "write_summary_json",
]

ERRORS_SCHEMA = "tcblran/errors-v1"
SUMMARY_SCHEMA = "tcblran/summary-v1"


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation protocol: horizon in seconds, IC count, control law."""

    horizon: float = 25.0
    n_ics: int = 30
    control_seed: int = 101
    control_lo: float = -0.15
    control_hi: float = 0.15

    def __post_init__(self):
        if self.horizon <= 0 or self.n_ics < 1:
            raise ConfigError("need horizon > 0 and n_ics >= 1")
        if self.control_hi < self.control_lo:
            raise ConfigError("empty control range")


@dataclass
class EvalReport:
    """Per-IC relative error series and their time averages.

    ``series[j]`` covers prediction steps k = 0 .. horizon_points-1 for the
    j-th initial condition (k = 0 is the reconstruction of the IC itself);
    ``time_avg[j]`` is its mean. ``meta`` echoes the run configuration.
    """

    ic_indices: np.ndarray
    times: np.ndarray
    series: list[np.ndarray] = field(default_factory=list)
    time_avg: np.ndarray = field(default_factory=lambda: np.zeros(0))
    meta: dict = field(default_factory=dict)


def relative_error_series(predicted: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-step ||x_hat - x|| / ||x|| with zero-norm truth steps excluded.

    Excluded steps trigger a warning; an all-zero truth raises ValueError.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    norms = np.linalg.norm(truth, axis=-1)
    keep = norms > 0
    if not np.any(keep):
        raise ValueError("true trajectory is identically zero")
    if not np.all(keep):
        warnings.warn(f"excluding {int((~keep).sum())} zero-norm true states "
                      "from the relative error series")
    err = np.linalg.norm(predicted - truth, axis=-1)
    return err[keep] / norms[keep]


def time_averaged_relative_error(series: np.ndarray) -> float:
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        raise ValueError("empty relative error series")
    return float(series.mean())


def _true_states(system, x0: np.ndarray, controls: np.ndarray, dt: float) -> np.ndarray:
    if isinstance(system, ControlAffineSystem):
        return simulate(system, x0, controls, dt).states
    if hasattr(system, "propagate"):
        return system.propagate(x0, controls)
    raise TypeError(f"cannot evaluate against {type(system).__name__}")


def evaluate_model(params: ModelParams, system, dataset: Dataset,
                   config: EvalConfig, *, model_tag: str = "",
                   seed: int = 0) -> EvalReport:
    """Roll the model from the last n_ics training samples and score it.

    Per IC, a fresh control sequence is drawn from a stream seeded by
    (config.control_seed, sample index) only, so two models evaluated on
    the same dataset see identical controls (a paired design). Initial
    conditions use the noise-free lifted states.
    """
    steps_exact = config.horizon / dataset.dt
    horizon_points = int(round(steps_exact))
    if abs(steps_exact - horizon_points) > 1e-9 or horizon_points < 2:
        raise ConfigError(f"horizon {config.horizon} is not a multiple of dt={dataset.dt}")
    if config.n_ics > dataset.n_train:
        raise ConfigError(f"n_ics={config.n_ics} exceeds n_train={dataset.n_train}")
    input_dim = dataset.controls.shape[1]
    ic_indices = np.arange(dataset.n_train - config.n_ics, dataset.n_train)
    report = EvalReport(ic_indices=ic_indices,
                        times=dataset.dt * np.arange(horizon_points))
    averages = []
    for idx in ic_indices:
        controls = random_piecewise_control((config.control_seed, int(idx)),
                                            horizon_points - 1,
                                            config.control_lo, config.control_hi,
                                            input_dim)
        x0_lifted = dataset.clean_states[idx]
        x0 = unlift(dataset.lift_map, x0_lifted)
        try:
            truth = _true_states(system, x0, controls, dataset.dt)
            z0 = encode(params, x0_lifted)
            latents = rollout_latent(params, z0, controls)
            lifted_pred = np.vstack([decode(params, z0)[None, :],
                                     decode(params, latents)])
            pred = unlift(dataset.lift_map, lifted_pred)
            series = relative_error_series(pred, truth)
        except (NumericError, ValueError) as exc:
            raise type(exc)(f"evaluation failed at IC {int(idx)}: {exc}") from exc
        report.series.append(series)
        averages.append(time_averaged_relative_error(series))
    report.time_avg = np.asarray(averages)
    report.meta = {
        "system": dataset.system_name,
        "snr_db": dataset.snr_db,
        "n_train": dataset.n_train,
        "model": model_tag,
        "seed": seed,
        "dt": dataset.dt,
        "horizon": config.horizon,
        "n_ics": config.n_ics,
        "control_seed": config.control_seed,
    }
    return report


_SHARED_META = ("system", "snr_db", "n_train", "dt", "horizon", "n_ics")


def _check_homogeneous(reports: list[EvalReport], keys=_SHARED_META + ("model",)):
    first = reports[0].meta
    for r in reports[1:]:
        for key in keys:
            if r.meta.get(key) != first.get(key):
                raise ConfigError(f"cannot pool reports with differing {key!r}: "
                                  f"{first.get(key)!r} vs {r.meta.get(key)!r}")


def aggregate_seeds(reports: list[EvalReport]) -> dict:
    """Pool per-IC time-averaged errors over seeds into one summary."""
    if not reports:
        raise ValueError("no reports to aggregate")
    _check_homogeneous(reports)
    pooled = np.concatenate([r.time_avg for r in reports])
    per_seed = []
    for r in reports:
        per_seed.append({
            "seed": r.meta.get("seed"),
            "median": float(np.median(r.time_avg)),
            "mean": float(r.time_avg.mean()),
            "time_avg_by_ic": {int(i): float(v)
                               for i, v in zip(r.ic_indices, r.time_avg)},
        })
    return {
        "schema": SUMMARY_SCHEMA,
        "meta": dict(reports[0].meta),
        "pooled": {
            "median": float(np.median(pooled)),
            "mean": float(pooled.mean()),
            "std": float(pooled.std()),
            "count": int(pooled.size),
        },
        "per_seed": per_seed,
    }


def compare(reports_a: list[EvalReport], reports_b: list[EvalReport]) -> dict:
    """Paired comparison of two models over shared (seed, IC) pairs.

    Ties count 0.5 toward the win rate of model a. Reports must share
    system, SNR, n_train, and the evaluation protocol.
    """
    if isinstance(reports_a, EvalReport):
        reports_a = [reports_a]
    if isinstance(reports_b, EvalReport):
        reports_b = [reports_b]
    if not reports_a or not reports_b:
        raise ValueError("need at least one report per model")
    _check_homogeneous(reports_a)
    _check_homogeneous(reports_b)
    _check_homogeneous([reports_a[0], reports_b[0]], keys=_SHARED_META)

    def pairs(reports):
        out = {}
        for r in reports:
            for i, v in zip(r.ic_indices, r.time_avg):
                out[(r.meta.get("seed"), int(i))] = float(v)
        return out

    pa, pb = pairs(reports_a), pairs(reports_b)
    if set(pa) != set(pb):
        raise ConfigError("reports do not cover the same (seed, IC) pairs")
    keys = sorted(pa)
    a = np.asarray([pa[k] for k in keys])
    b = np.asarray([pb[k] for k in keys])
    wins = float(np.mean(np.where(a < b, 1.0, np.where(a == b, 0.5, 0.0))))
    return {
        "model_a": reports_a[0].meta.get("model"),
        "model_b": reports_b[0].meta.get("model"),
        "n_pairs": len(keys),
        "median_a": float(np.median(a)),
        "median_b": float(np.median(b)),
        "mean_a": float(a.mean()),
        "mean_b": float(b.mean()),
        "win_rate_a": wins,
        "meta": {k: reports_a[0].meta.get(k) for k in _SHARED_META},
    }


def write_errors_csv(report: EvalReport, path, config_echo: dict | None = None) -> None:
    """One row per (IC, time step); floats via repr for byte-stable reruns."""
    lines = [f"# schema={ERRORS_SCHEMA}"]
    if config_echo is not None:
        lines.append("# config=" + json.dumps(config_echo, sort_keys=True))
    lines.append("ic,t,rel_error")
    for idx, series in zip(report.ic_indices, report.series):
        for t, v in zip(report.times[:len(series)], series):
            lines.append(f"{int(idx)},{repr(float(t))},{repr(float(v))}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_errors_csv(path) -> dict[int, np.ndarray]:
    """Inverse of write_errors_csv: IC index -> relative error series."""
    series: dict[int, list[float]] = {}
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("ic,"):
            continue
        ic, _, err = line.split(",")
        series.setdefault(int(ic), []).append(float(err))
    return {ic: np.asarray(vals) for ic, vals in series.items()}


def write_summary_json(summary: dict, path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
