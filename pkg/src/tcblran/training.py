"""Adam training loop with milestone learning-rate decay and grad clipping.

Weight decay is decoupled: every parameter additionally shrinks by
lr * weight_decay * p alongside the Adam update. Gradients are clipped
by their global norm across all parameters before the update.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import GradientSet, Node, backward
from .datagen import Dataset, window_plan
from .errors import ConfigError, NumericError
from .losses import LossWeights, make_batch, total_loss_node
from .model import Architecture, ModelParams, init_params

__all__ = [
    "TrainerConfig",
    "AdamState",
    "TrainingHistory",
    "lr_at_epoch",
    "clip_gradients",
    "adam_step",
    "train",
    "read_history_csv",
]

HISTORY_SCHEMA = "tcblran/history-v1"
HISTORY_COLUMNS = ("epoch", "lr", "L_id", "L_fwd", "L_tc", "L_tot")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainerConfig:
    """Optimizer schedule and loop settings.

    ``batch_size`` must agree with LossWeights.batch_size; both exist so
    each config object is self-describing.
    """

    lr0: float = 0.01
    lr_decay: float = 0.5
    milestones: tuple[int, ...] = (30, 100, 200, 400)
    weight_decay: float = 0.0
    grad_clip: float = 0.05
    epochs: int = 600
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.lr0 <= 0 or not 0 < self.lr_decay <= 1:
            raise ConfigError("need lr0 > 0 and 0 < lr_decay <= 1")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("need epochs >= 0 and batch_size >= 1")
        if self.grad_clip <= 0 or self.weight_decay < 0:
            raise ConfigError("need grad_clip > 0 and weight_decay >= 0")
        if any(b <= a for a, b in zip(self.milestones, self.milestones[1:])):
            raise ConfigError("milestones must be strictly increasing")


@dataclass
class AdamState:
    """First and second moment accumulators plus the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()}, t=0)


@dataclass
class TrainingHistory:
    """Per-epoch mean loss components at the pre-update parameters."""

    epoch: np.ndarray
    lr: np.ndarray
    l_id: np.ndarray
    l_fwd: np.ndarray
    l_tc: np.ndarray
    l_tot: np.ndarray

    def columns(self) -> dict[str, np.ndarray]:
        return dict(zip(HISTORY_COLUMNS,
                        (self.epoch, self.lr, self.l_id, self.l_fwd,
                         self.l_tc, self.l_tot)))

    def to_csv(self, path, config_echo: dict | None = None) -> None:
        """Write the history; floats use repr so reruns match byte-for-byte."""
        lines = [f"# schema={HISTORY_SCHEMA}"]
        if config_echo is not None:
            lines.append("# config=" + json.dumps(config_echo, sort_keys=True))
        lines.append(",".join(HISTORY_COLUMNS))
        cols = self.columns()
        for i in range(len(self.epoch)):
            row = [str(int(self.epoch[i]))]
            row += [repr(float(cols[c][i])) for c in HISTORY_COLUMNS[1:]]
            lines.append(",".join(row))
        Path(path).write_text("\n".join(lines) + "\n")


def read_history_csv(path) -> TrainingHistory:
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("epoch"):
            continue
        rows.append([float(v) for v in line.split(",")])
    arr = np.asarray(rows)
    if arr.ndim != 2 or arr.shape[1] != len(HISTORY_COLUMNS):
        raise ConfigError(f"malformed history file {path}")
    return TrainingHistory(epoch=arr[:, 0].astype(int), lr=arr[:, 1],
                           l_id=arr[:, 2], l_fwd=arr[:, 3], l_tc=arr[:, 4],
                           l_tot=arr[:, 5])


def lr_at_epoch(config: TrainerConfig, epoch: int) -> float:
    """Piecewise-constant schedule: decay once per milestone <= epoch."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    hits = sum(1 for ms in config.milestones if ms <= epoch)
    return config.lr0 * config.lr_decay ** hits


def clip_gradients(grads: GradientSet, max_norm: float) -> GradientSet:
    """Scale all gradients so their global norm does not exceed max_norm."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    total = 0.0
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name!r}")
        total += float(np.dot(g.ravel(), g.ravel()))
    norm = float(np.sqrt(total))
    if norm <= max_norm:
        return dict(grads)
    factor = max_norm / norm
    return {k: g * factor for k, g in grads.items()}


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: GradientSet,
              lr: float, weight_decay: float = 0.0
              ) -> tuple[AdamState, dict[str, np.ndarray]]:
    """One Adam update with decoupled weight decay; pure, returns new values."""
    t = state.t + 1
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    new_m, new_v, new_p = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m = ADAM_BETA1 * state.m[name] + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state.v[name] + (1.0 - ADAM_BETA2) * g * g
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        new_m[name], new_v[name] = m, v
        new_p[name] = p - update - lr * weight_decay * p
    return AdamState(m=new_m, v=new_v, t=t), new_p


def train(config, dataset: Dataset) -> tuple[ModelParams, TrainingHistory]:
    """Train on the first n_train samples of a dataset.

    ``config`` carries ``arch`` (Architecture), ``weights`` (LossWeights),
    and ``trainer`` (TrainerConfig); ExperimentConfig satisfies this.
    Window starts are reshuffled every epoch from a generator seeded by
    (trainer.seed, 1), separate from the parameter-init stream.
    """
    arch: Architecture = config.arch
    weights: LossWeights = config.weights
    trainer: TrainerConfig = config.trainer
    if trainer.batch_size != weights.batch_size:
        raise ConfigError(f"trainer.batch_size={trainer.batch_size} differs from "
                          f"weights.batch_size={weights.batch_size}")
    if arch.input_dim != dataset.lifted_states.shape[1]:
        raise ConfigError(f"arch.input_dim={arch.input_dim} != lifted dim "
                          f"{dataset.lifted_states.shape[1]}")
    m_eff, starts = window_plan(dataset.n_train, weights.batch_size,
                                weights.k_m, weights.k_tm)
    params0 = init_params(trainer.seed, arch)
    flat = {k: v.copy() for k, v in params0.flat().items()}
    adam = AdamState.zeros(flat)
    shuffle_rng = np.random.default_rng((trainer.seed, 1))
    n_cols = len(HISTORY_COLUMNS) - 1
    history = np.zeros((trainer.epochs, n_cols))
    for epoch in range(trainer.epochs):
        lr = lr_at_epoch(trainer, epoch)
        order = shuffle_rng.permutation(len(starts))
        sums = np.zeros(4)  # L_id, L_fwd, L_tc, L_tot
        for bi in order:
            start = starts[bi]
            batch = make_batch(dataset, start, m_eff, weights.k_m, weights.k_tm)
            leaves = {k: Node(v, name=k) for k, v in flat.items()}
            root, comps = total_loss_node(leaves, batch, weights)
            total = float(root.value)
            if not np.isfinite(total):
                raise NumericError(f"non-finite loss at epoch {epoch}, "
                                   f"window start {start}")
            try:
                grads = clip_gradients(backward(root, leaves), trainer.grad_clip)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch}, window start {start}: {exc}") from exc
            adam, flat = adam_step(adam, flat, grads, lr, trainer.weight_decay)
            sums += (comps["L_id"], comps["L_fwd"], comps["L_tc"], total)
        means = sums / len(starts)
        history[epoch] = (lr, *means)
    hist = TrainingHistory(epoch=np.arange(trainer.epochs), lr=history[:, 0],
                           l_id=history[:, 1], l_fwd=history[:, 2],
                           l_tc=history[:, 3], l_tot=history[:, 4])
    return params0.replace_flat(flat), hist
