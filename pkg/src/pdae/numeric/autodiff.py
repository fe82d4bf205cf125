"""Minimal reverse-mode differentiation over numpy arrays.

Just enough machinery to differentiate the training losses: affine maps, tanh,
Euclidean norms raised to a power beta, concatenation, sums and means. Values
are float64 ndarrays (0-d for scalars). ``backward(root)`` returns a gradient
lookup instead of mutating tensors, so several loss roots can be
differentiated independently on one shared graph.

Convention pinned by the losses: the derivative of ||u||^beta at u = 0 with
beta < 2 is taken to be 0 (a valid subgradient), so comparing a point with
itself never produces NaNs.
"""

from __future__ import annotations

import numpy as np

from .distances import pairwise_euclidean


class Tensor:
    __slots__ = ("value", "parents", "vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=float)
        self.parents = parents
        self.vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape})"


def const(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Tensor:
    a, b = const(a), const(b)
    return Tensor(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = const(a), const(b)
    return Tensor(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.value.shape), -_unbroadcast(g, b.value.shape)),
    )


def smul(a, c: float) -> Tensor:
    a = const(a)
    c = float(c)
    return Tensor(a.value * c, (a,), lambda g: (g * c,))


def matmul(a, b) -> Tensor:
    a, b = const(a), const(b)
    return Tensor(
        a.value @ b.value,
        (a, b),
        lambda g: (g @ b.value.T, a.value.T @ g),
    )


def transpose(a) -> Tensor:
    a = const(a)
    return Tensor(a.value.T, (a,), lambda g: (g.T,))


def tanh(a) -> Tensor:
    a = const(a)
    t = np.tanh(a.value)
    return Tensor(t, (a,), lambda g: (g * (1.0 - t * t),))


def detach(a) -> Tensor:
    """Block gradient flow: same value, no parents."""
    return Tensor(const(a).value)


def concat_rows(parts) -> Tensor:
    parts = [const(p) for p in parts]
    sizes = [p.value.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(g[offsets[i] : offsets[i + 1]] for i in range(len(parts)))

    return Tensor(np.concatenate([p.value for p in parts], axis=0), tuple(parts), vjp)


def concat_cols(a, b) -> Tensor:
    a, b = const(a), const(b)
    na = a.value.shape[1]
    return Tensor(
        np.concatenate([a.value, b.value], axis=1),
        (a, b),
        lambda g: (g[:, :na], g[:, na:]),
    )


def rows(a, i0: int, i1: int) -> Tensor:
    a = const(a)

    def vjp(g):
        full = np.zeros_like(a.value)
        full[i0:i1] = g
        return (full,)

    return Tensor(a.value[i0:i1], (a,), vjp)


def sum_all(a) -> Tensor:
    a = const(a)
    return Tensor(a.value.sum(), (a,), lambda g: (np.broadcast_to(g, a.value.shape) * 1.0,))


def mean_all(a) -> Tensor:
    a = const(a)
    n = a.value.size
    return Tensor(a.value.mean(), (a,), lambda g: (np.broadcast_to(g / n, a.value.shape) * 1.0,))


def _pow_coef(g, r, beta):
    """d(r^beta)/dr / r = beta * r^(beta-2), with the zero-distance subgradient."""
    if beta == 2.0:
        return 2.0 * g
    with np.errstate(divide="ignore", invalid="ignore"):
        c = beta * np.where(r > 0.0, r ** (beta - 2.0), 0.0)
    return g * c


def pairwise_pow(a, b, beta: float) -> Tensor:
    """Matrix of ||a_i - b_j||^beta, differentiable in both point sets."""
    a, b = const(a), const(b)
    beta = float(beta)
    r = pairwise_euclidean(a.value, b.value)

    def vjp(g):
        coef = _pow_coef(g, r, beta)
        ga = coef.sum(axis=1)[:, None] * a.value - coef @ b.value
        gb = coef.sum(axis=0)[:, None] * b.value - coef.T @ a.value
        return (ga, gb)

    return Tensor(r if beta == 1.0 else r**beta, (a, b), vjp)


def paired_pow(a, b, beta: float) -> Tensor:
    """Vector of row-aligned ||a_i - b_i||^beta."""
    a, b = const(a), const(b)
    beta = float(beta)
    diff = a.value - b.value
    r = np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def vjp(g):
        coef = _pow_coef(g, r, beta)
        ga = coef[:, None] * diff
        return (ga, -ga)

    return Tensor(r if beta == 1.0 else r**beta, (a, b), vjp)


def _toposort(root: Tensor):
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


class Grads:
    """Gradient lookup produced by backward(); missing tensors give zeros."""

    def __init__(self, table):
        self._table = table

    def of(self, t: Tensor) -> np.ndarray:
        g = self._table.get(id(t))
        return np.zeros_like(t.value) if g is None else g


def backward(root: Tensor) -> Grads:
    if root.value.ndim != 0:
        raise ValueError(f"backward needs a scalar root, got shape {root.value.shape}")
    order = _toposort(root)
    table = {id(root): np.ones_like(root.value)}
    for node in reversed(order):
        g = table.get(id(node))
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None:
                continue
            key = id(parent)
            if key in table:
                table[key] = table[key] + pg
            else:
                table[key] = pg
    return Grads(table)
