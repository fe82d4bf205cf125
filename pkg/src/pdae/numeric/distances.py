"""Pairwise Euclidean distance kernels shared by every metric and loss."""

from __future__ import annotations

import numpy as np

# Row-block size for the chunked pairwise computation: keeps the (block, n, d)
# difference tensor around ~32 MB of float64 regardless of input size.
_BLOCK_ELEMENTS = 4_000_000


def as_points(x, name="points") -> np.ndarray:
    """Validate and return an (n, d) float64 array; 1-D input becomes (n, 1)."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def pairwise_euclidean(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Raw distances ||x_i - y_j||_2, computed from explicit differences.

    Direct differences (not the dot-product expansion) so that entries for
    near-identical points do not suffer cancellation; work is chunked over
    rows of x to bound memory.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    m, d = x.shape
    n = y.shape[0]
    out = np.empty((m, n), dtype=float)
    block = max(1, _BLOCK_ELEMENTS // max(1, n * d))
    for i0 in range(0, m, block):
        i1 = min(m, i0 + block)
        diff = x[i0:i1, None, :] - y[None, :, :]
        np.sqrt(np.einsum("ijk,ijk->ij", diff, diff), out=out[i0:i1])
    return out


def pairwise_distances(x, y, beta: float) -> np.ndarray:
    """Matrix of ||x_i - y_j||^beta for beta in (0, 2]."""
    x = as_points(x, "x")
    y = as_points(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ValueError(
            f"dimension mismatch: x has {x.shape[1]} columns, y has {y.shape[1]}"
        )
    beta = float(beta)
    if not (0.0 < beta <= 2.0):
        raise ValueError(f"beta must lie in (0, 2], got {beta}")
    r = pairwise_euclidean(x, y)
    if beta == 1.0:
        return r
    if beta == 2.0:
        return r * r
    return r**beta


def paired_distances(x: np.ndarray, y: np.ndarray, beta: float) -> np.ndarray:
    """Row-aligned ||x_i - y_i||^beta (both (n, d))."""
    diff = x - y
    r = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if beta == 1.0:
        return r
    return r ** float(beta)
