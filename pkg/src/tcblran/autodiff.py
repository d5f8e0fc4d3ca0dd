"""Minimal reverse-mode automatic differentiation over float64 arrays.

Graphs are built eagerly by the op functions below; each op records its
tensor parents and a closure mapping the output gradient to parent
gradients. Operands that are not :class:`Node` instances are treated as
constants and receive no gradient. :func:`backward` walks the graph once
from a scalar root and accumulates gradients into every reachable leaf.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .errors import NumericError

__all__ = [
    "Node",
    "GradientSet",
    "matmul",
    "add",
    "subtract",
    "scale",
    "scale_rows",
    "tanh",
    "sum_of_squares",
    "mean",
    "transpose",
    "rows",
    "backward",
    "gradient_check",
]

GradientSet = dict  # parameter name -> gradient array


class Node:
    """One value in the computation graph.

    Leaves carry an optional ``name`` so :func:`backward` can report their
    gradients; interior nodes carry the vjp closure of the op that made them.
    """

    __slots__ = ("value", "grad", "parents", "vjp", "name")

    def __init__(self, value, parents: tuple = (), vjp: Callable | None = None,
                 name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.vjp = vjp
        self.name = name

    def __repr__(self):
        tag = self.name or ("leaf" if not self.parents else "op")
        return f"Node({tag}, shape={self.value.shape})"


def _value(x) -> np.ndarray:
    return x.value if isinstance(x, Node) else np.asarray(x, dtype=np.float64)


def _track(*operands):
    # Tensor operands participate in the backward pass; constants do not.
    return tuple(x for x in operands if isinstance(x, Node))


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to the shape an operand had before broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def matmul(a, b) -> Node:
    """Matrix (or matrix-vector) product a @ b."""
    av, bv = _value(a), _value(b)
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
        raise ValueError(f"matmul needs 1-d or 2-d operands, got {av.ndim}-d and {bv.ndim}-d")
    if av.shape[-1] != bv.shape[0]:
        raise ValueError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
    val = av @ bv

    def grad_a(g):
        if bv.ndim == 2:
            return g @ bv.T if av.ndim == 2 else bv @ g
        return np.outer(g, bv) if av.ndim == 2 else g * bv

    def grad_b(g):
        if av.ndim == 2:
            return av.T @ g
        return np.outer(av, g) if bv.ndim == 2 else g * av

    rules = []
    if isinstance(a, Node):
        rules.append(grad_a)
    if isinstance(b, Node):
        rules.append(grad_b)

    def vjp(g):
        return tuple(rule(g) for rule in rules)

    return Node(val, _track(a, b), vjp)


def _addsub(a, b, sign: float) -> Node:
    av, bv = _value(a), _value(b)
    try:
        val = av + sign * bv
    except ValueError:
        raise ValueError(f"shape mismatch: {av.shape} vs {bv.shape}") from None
    rules = []
    if isinstance(a, Node):
        rules.append(lambda g: _unbroadcast(g, av.shape))
    if isinstance(b, Node):
        rules.append(lambda g: _unbroadcast(sign * g, bv.shape))

    def vjp(g):
        return tuple(rule(g) for rule in rules)

    return Node(val, _track(a, b), vjp)


def add(a, b) -> Node:
    """Elementwise a + b with numpy broadcasting (e.g. matrix + bias row)."""
    return _addsub(a, b, 1.0)


def subtract(a, b) -> Node:
    """Elementwise a - b with numpy broadcasting."""
    return _addsub(a, b, -1.0)


def scale(a, c: float) -> Node:
    """Multiply by a constant real scalar."""
    c = float(c)
    val = _value(a) * c
    return Node(val, _track(a), lambda g: (g * c,))


def scale_rows(a, weights: np.ndarray) -> Node:
    """Scale each row of a 2-d node by a constant per-row factor."""
    av = _value(a)
    w = np.asarray(weights, dtype=np.float64)
    if av.ndim != 2 or w.shape != (av.shape[0],):
        raise ValueError(f"scale_rows needs (n, d) and (n,), got {av.shape} and {w.shape}")
    col = w[:, None]
    return Node(av * col, _track(a), lambda g: (g * col,))


def tanh(a) -> Node:
    val = np.tanh(_value(a))
    return Node(val, _track(a), lambda g: (g * (1.0 - val * val),))


def sum_of_squares(a) -> Node:
    """Scalar sum of squared entries."""
    av = _value(a)
    val = np.asarray((av * av).sum())
    return Node(val, _track(a), lambda g: (g * 2.0 * av,))


def mean(a) -> Node:
    """Scalar mean over all entries."""
    av = _value(a)
    if av.size == 0:
        raise ValueError("mean of an empty array")
    val = np.asarray(av.mean())
    return Node(val, _track(a), lambda g: (np.full(av.shape, float(g) / av.size),))


def transpose(a) -> Node:
    av = _value(a)
    if av.ndim != 2:
        raise ValueError(f"transpose needs a 2-d operand, got {av.ndim}-d")
    return Node(av.T, _track(a), lambda g: (g.T,))


def rows(a, start: int, stop: int) -> Node:
    """Contiguous row slice a[start:stop] of a 2-d node."""
    av = _value(a)
    if av.ndim != 2:
        raise ValueError(f"rows needs a 2-d operand, got {av.ndim}-d")
    if not 0 <= start <= stop <= av.shape[0]:
        raise ValueError(f"row slice [{start}:{stop}] outside 0..{av.shape[0]}")

    def vjp(g):
        full = np.zeros_like(av)
        full[start:stop] = g
        return (full,)

    return Node(av[start:stop], _track(a), vjp)


def _toposort(root: Node) -> list[Node]:
    order: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            stack.append((parent, False))
    return order


def backward(root: Node, params: Mapping[str, Node] | None = None) -> GradientSet:
    """Accumulate gradients of a scalar root into every reachable leaf.

    Returns a mapping from leaf name to gradient. When ``params`` is given,
    the result covers exactly those parameters, with exact zeros for any
    that the graph never touched.
    """
    if root.value.size != 1:
        raise ValueError(f"backward root must be scalar, got shape {root.value.shape}")
    order = _toposort(root)
    for node in order:
        node.grad = None
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.vjp is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            parent.grad = g if parent.grad is None else parent.grad + g
    out: GradientSet = {}
    for node in order:
        if node.name is not None and not node.parents:
            out[node.name] = np.zeros_like(node.value) if node.grad is None else node.grad
    if params is not None:
        for name, leaf in params.items():
            if name not in out:
                out[name] = np.zeros_like(leaf.value)
    return out


def gradient_check(f: Callable, params: Mapping[str, np.ndarray],
                   eps: float = 1e-6) -> float:
    """Compare backward() against central finite differences.

    ``f`` maps a dict of named leaf Nodes to a scalar Node. Returns the
    worst relative error |analytic - numeric| / max(1, |analytic|, |numeric|)
    over every coordinate of every parameter.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    base = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
    leaves = {k: Node(v, name=k) for k, v in base.items()}
    analytic = backward(f(leaves), leaves)

    def probe(values) -> float:
        out = f({k: Node(v, name=k) for k, v in values.items()})
        val = float(out.value)
        if not np.isfinite(val):
            raise NumericError("non-finite loss value during gradient check")
        return val

    worst = 0.0
    for name, value in base.items():
        grad = np.asarray(analytic[name], dtype=np.float64)
        flat = value.ravel()
        for i in range(flat.size):
            shifted = dict(base)
            plus = value.copy()
            plus.ravel()[i] += eps
            shifted[name] = plus
            f_plus = probe(shifted)
            minus = value.copy()
            minus.ravel()[i] -= eps
            shifted[name] = minus
            f_minus = probe(shifted)
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(grad.ravel()[i])
            if not np.isfinite(a):
                raise NumericError(f"non-finite analytic gradient in {name!r}")
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, err)
    return worst
