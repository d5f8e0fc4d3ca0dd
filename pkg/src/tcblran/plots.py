"""SVG figures for finished runs. Deterministic output: fixed hash salt,
no embedded timestamps, so rerunning a run reproduces the files exactly."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "tcblran"
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_error_vs_time", "plot_error_vs_ntrain", "plot_history"]

_SAVE_KWARGS = {"format": "svg", "metadata": {"Date": None}}


def _mean_series(reports) -> tuple[np.ndarray, np.ndarray]:
    times = reports[0].times
    length = min(min(len(s) for s in r.series) for r in reports)
    stack = np.vstack([s[:length] for r in reports for s in r.series])
    return times[:length], stack.mean(axis=0)


def plot_error_vs_time(reports_by_model: dict, path) -> None:
    """Mean relative error against prediction time, one line per model."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for label, reports in sorted(reports_by_model.items()):
        times, mean = _mean_series(reports)
        ax.plot(times, mean, label=label)
    ax.set_xlabel("prediction time [s]")
    ax.set_ylabel("relative error")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(path), **_SAVE_KWARGS)
    plt.close(fig)


def plot_error_vs_ntrain(rows_by_model: dict, path) -> None:
    """Median pooled error per training-set size, grouped bars per model."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    labels = sorted(rows_by_model)
    values = sorted({row["n_train"] for rows in rows_by_model.values() for row in rows})
    width = 0.8 / max(len(labels), 1)
    x = np.arange(len(values), dtype=float)
    for j, label in enumerate(labels):
        by_n = {row["n_train"]: row["median"] for row in rows_by_model[label]}
        heights = [by_n.get(v, np.nan) for v in values]
        ax.bar(x + j * width, heights, width=width, label=label)
    ax.set_xticks(x + width * (len(labels) - 1) / 2)
    ax.set_xticklabels([str(v) for v in values])
    ax.set_xlabel("training samples")
    ax.set_ylabel("median relative error")
    ax.set_yscale("log")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(path), **_SAVE_KWARGS)
    plt.close(fig)


def plot_history(history, path, title: str = "") -> None:
    """Loss components over epochs from one TrainingHistory."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for label, series in (("L_id", history.l_id), ("L_fwd", history.l_fwd),
                          ("L_tc", history.l_tc), ("L_tot", history.l_tot)):
        if np.any(series != 0):
            ax.plot(history.epoch, series, label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(path), **_SAVE_KWARGS)
    plt.close(fig)
