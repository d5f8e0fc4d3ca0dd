"""Training losses: reconstruction, multi-step forward, temporal consistency.

A batch is one window of m + k_m + k_tm consecutive lifted samples with
the aligned controls. The m leading samples are the batch elements; the
tail supplies forward targets and the extra consistency steps. All
indices below are window-relative: element p rolled k steps lands at
window position p + k and traverses controls p .. p+k-1.

Each loss has a graph-building form (suffix ``_node``) used by training
and a plain-float wrapper with the same name minus the suffix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .errors import ConfigError
from .model import ModelParams

__all__ = [
    "LossWeights",
    "Batch",
    "make_batch",
    "param_leaves",
    "identity_loss",
    "forward_loss",
    "temporal_consistency_loss",
    "total_loss",
    "identity_loss_node",
    "forward_loss_node",
    "temporal_consistency_loss_node",
    "total_loss_node",
]


@dataclass(frozen=True)
class LossWeights:
    """Loss term weights and horizons.

    ``batch_size`` is the number of elements m in a batch; k_m is the
    forward-prediction horizon and k_tm the consistency horizon. k_tm
    stays >= 2 because the 1/(2(k_tm-1)) prefactor is undefined at 1;
    a model trained without the consistency term just sets gamma_tc = 0.
    """

    gamma_id: float = 1.0
    gamma_fwd: float = 1.0
    gamma_tc: float = 0.0
    k_m: int = 12
    k_tm: int = 2
    batch_size: int = 32

    def __post_init__(self):
        if min(self.gamma_id, self.gamma_fwd, self.gamma_tc) < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.k_m < 1:
            raise ValueError("k_m must be >= 1")
        if self.k_tm < 2:
            raise ValueError("k_tm must be >= 2")
        if self.batch_size <= self.k_tm:
            raise ValueError(f"batch_size {self.batch_size} must exceed k_tm {self.k_tm}")


@dataclass(frozen=True)
class Batch:
    """One training window: states (m + k_m + k_tm, d), controls one shorter."""

    states: np.ndarray
    controls: np.ndarray
    start: int
    m: int

    def __post_init__(self):
        if self.states.ndim != 2 or self.controls.ndim != 2:
            raise ValueError("batch states and controls must be 2-d")
        if len(self.controls) != len(self.states) - 1:
            raise ValueError("need len(controls) == len(states) - 1")
        if not 1 <= self.m <= len(self.states):
            raise ValueError(f"m={self.m} outside window of {len(self.states)} states")


def make_batch(dataset, start: int, m: int, k_m: int, k_tm: int) -> Batch:
    """Slice one window out of a dataset's training view."""
    window = m + k_m + k_tm
    stop = start + window
    if start < 0 or stop > len(dataset.lifted_states):
        raise ConfigError(
            f"window [{start}:{stop}] outside dataset of {len(dataset.lifted_states)} samples")
    return Batch(states=dataset.lifted_states[start:stop],
                 controls=dataset.controls[start:stop - 1], start=start, m=m)


def param_leaves(params: ModelParams) -> dict[str, Node]:
    """Named graph leaves for every trainable parameter."""
    return {k: Node(v, name=k) for k, v in params.flat().items()}


def _encode(p: dict[str, Node], x: np.ndarray) -> Node:
    if "enc_w1" in p:
        h = ad.tanh(ad.add(ad.matmul(x, p["enc_w1"]), p["enc_b1"]))
        return ad.add(ad.matmul(h, p["enc_w2"]), p["enc_b2"])
    return ad.add(ad.matmul(x, p["enc_w2"]), p["enc_b2"])


def _decode(p: dict[str, Node], z: Node) -> Node:
    if "dec_w1" in p:
        h = ad.tanh(ad.add(ad.matmul(z, p["dec_w1"]), p["dec_b1"]))
        return ad.add(ad.matmul(h, p["dec_w2"]), p["dec_b2"])
    return ad.add(ad.matmul(z, p["dec_w2"]), p["dec_b2"])


def _latent_maps(p: dict[str, Node]) -> tuple[Node, list[Node]]:
    # Transposed so a row-stacked batch steps as z @ A^T + sum u_i * (z @ B_i^T).
    at = ad.transpose(p["a_tilde"])
    bts = []
    i = 0
    while f"b_tilde_{i}" in p:
        bts.append(ad.transpose(p[f"b_tilde_{i}"]))
        i += 1
    return at, bts


def _step(z: Node, at: Node, bts: list[Node], u_rows: np.ndarray) -> Node:
    out = ad.matmul(z, at)
    for i, bt in enumerate(bts):
        out = ad.add(out, ad.scale_rows(ad.matmul(z, bt), u_rows[:, i]))
    return out


def identity_loss_node(p: dict[str, Node], batch: Batch) -> Node:
    x = batch.states[:batch.m]
    rec = _decode(p, _encode(p, x))
    return ad.scale(ad.sum_of_squares(ad.subtract(rec, x)), 1.0 / (2.0 * batch.m))


def forward_loss_node(p: dict[str, Node], batch: Batch, k_m: int) -> Node:
    m = batch.m
    if k_m < 1:
        raise ConfigError("k_m must be >= 1")
    if len(batch.states) < m + k_m:
        raise ConfigError(f"forward loss needs m + k_m = {m + k_m} states, "
                          f"batch has {len(batch.states)}")
    at, bts = _latent_maps(p)
    z = _encode(p, batch.states[:m])
    acc = None
    for k in range(1, k_m + 1):
        z = _step(z, at, bts, batch.controls[k - 1:k - 1 + m])
        term = ad.sum_of_squares(ad.subtract(_decode(p, z), batch.states[k:k + m]))
        acc = term if acc is None else ad.add(acc, term)
    return ad.scale(acc, 1.0 / (2.0 * k_m * m))


def temporal_consistency_loss_node(p: dict[str, Node], batch: Batch, k_tm: int) -> Node:
    m = batch.m
    if k_tm < 2:
        raise ConfigError("k_tm must be >= 2")
    if m <= k_tm:
        raise ConfigError(f"batch m={m} must exceed k_tm={k_tm}")
    if len(batch.controls) < m + k_tm - 1:
        raise ConfigError(f"consistency loss needs {m + k_tm - 1} controls, "
                          f"batch has {len(batch.controls)}")
    at, bts = _latent_maps(p)
    # rolls[j] row p encodes window position p advanced j steps (lands at p+j).
    rolls = [_encode(p, batch.states[:m])]
    for j in range(1, k_tm + 1):
        rolls.append(_step(rolls[-1], at, bts, batch.controls[j - 1:j - 1 + m]))
    acc_q = None
    for q in range(1, k_tm):
        acc_k = None
        for k in range(1, k_tm - q + 1):
            # Row p of rolls[k] and row p-q of rolls[k+q] land on the same
            # position p+k; compare them for every p in q..m-1.
            diff = ad.subtract(ad.rows(rolls[k], q, m), ad.rows(rolls[k + q], 0, m - q))
            term = ad.scale(ad.sum_of_squares(diff), 1.0 / (m - q))
            acc_k = term if acc_k is None else ad.add(acc_k, term)
        lq = ad.scale(acc_k, 1.0 / (k_tm - q))
        acc_q = lq if acc_q is None else ad.add(acc_q, lq)
    return ad.scale(acc_q, 1.0 / (2.0 * (k_tm - 1)))


def total_loss_node(p: dict[str, Node], batch: Batch,
                    weights: LossWeights) -> tuple[Node, dict[str, float]]:
    """Weighted sum of the loss terms; skips terms whose weight is zero.

    Returns the graph root and the unweighted component values (skipped
    components report 0.0).
    """
    comps = {"L_id": 0.0, "L_fwd": 0.0, "L_tc": 0.0}
    total = None
    if weights.gamma_id != 0.0:
        node = identity_loss_node(p, batch)
        comps["L_id"] = float(node.value)
        total = ad.scale(node, weights.gamma_id)
    if weights.gamma_fwd != 0.0:
        node = forward_loss_node(p, batch, weights.k_m)
        comps["L_fwd"] = float(node.value)
        term = ad.scale(node, weights.gamma_fwd)
        total = term if total is None else ad.add(total, term)
    if weights.gamma_tc != 0.0:
        node = temporal_consistency_loss_node(p, batch, weights.k_tm)
        comps["L_tc"] = float(node.value)
        term = ad.scale(node, weights.gamma_tc)
        total = term if total is None else ad.add(total, term)
    if total is None:
        total = Node(0.0)
    return total, comps


def identity_loss(params: ModelParams, batch: Batch) -> float:
    """Mean squared reconstruction error over the batch elements, halved."""
    return float(identity_loss_node(param_leaves(params), batch).value)


def forward_loss(params: ModelParams, batch: Batch, k_m: int) -> float:
    """Decoded multi-step prediction error averaged over horizon and batch."""
    return float(forward_loss_node(param_leaves(params), batch, k_m).value)


def temporal_consistency_loss(params: ModelParams, batch: Batch, k_tm: int) -> float:
    """Latent disagreement between rollouts that land on the same sample."""
    return float(temporal_consistency_loss_node(param_leaves(params), batch, k_tm).value)


def total_loss(params: ModelParams, batch: Batch,
               weights: LossWeights) -> tuple[float, dict[str, float]]:
    """Weighted total and the unweighted component values."""
    node, comps = total_loss_node(param_leaves(params), batch, weights)
    return float(node.value), comps
