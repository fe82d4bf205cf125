"""Scoring rules and two-sample distances.

All estimators operate on empirical samples given as (n, d) arrays (1-D
arrays are treated as (n, 1)).

Conventions, fixed once so identities hold at the estimator level:

* ``energy_score`` / ``crps`` use the plug-in estimator — the score of the
  empirical distribution itself — so enumerating a small support by hand
  reproduces the returned value exactly. The within-sample term is the full
  V-statistic mean (zero diagonal included).
* ``energy_distance`` and ``mmd_squared`` are V-statistics (diagonals
  included), which makes ``energy_distance == 2 * mmd_squared`` exact, to
  rounding, under the distance kernel — not merely asymptotically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric.distances import as_points, pairwise_distances, pairwise_euclidean


@dataclass(frozen=True)
class KernelSpec:
    """Positive-definite kernel choice: 'gaussian' (bandwidth) or 'distance' (beta)."""

    kind: str
    bandwidth: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.bandwidth is None or not (self.bandwidth > 0):
                raise ValueError(f"gaussian kernel needs bandwidth > 0, got {self.bandwidth}")
        elif self.kind == "distance":
            if self.beta is None or not (0.0 < self.beta < 2.0):
                raise ValueError(f"distance kernel needs beta in (0, 2), got {self.beta}")
        else:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @staticmethod
    def gaussian(bandwidth: float) -> "KernelSpec":
        return KernelSpec("gaussian", bandwidth=float(bandwidth))

    @staticmethod
    def distance(beta: float) -> "KernelSpec":
        return KernelSpec("distance", beta=float(beta))


def _check_same_dim(x, y):
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]} columns")


def energy_score(sample, x, beta: float = 1.0) -> float:
    """Energy score of the empirical distribution of ``sample`` at outcome x.

    0.5 * E||X - X'||^beta - E||X - x||^beta with (X, X') i.i.d. from the
    empirical law. Higher is better; the unique maximizer in expectation is
    the true distribution (strictly proper for beta in (0, 2)).
    """
    p = as_points(sample, "sample")
    if p.shape[0] < 1:
        raise ValueError("energy_score needs a nonempty sample")
    if not (0.0 < beta < 2.0):
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    xv = np.asarray(x, dtype=float).reshape(1, -1)
    _check_same_dim(p, xv)
    m = p.shape[0]
    within = 0.0
    if m > 1:
        within = pairwise_distances(p, p, beta).sum() / (2.0 * m * m)
    cross = pairwise_distances(p, xv, beta).mean()
    return float(within - cross)


def energy_distance(x, y, beta: float = 1.0) -> float:
    """V-statistic energy distance: 2 E||X-Y||^b - E||X-X'||^b - E||Y-Y'||^b."""
    xs = as_points(x, "x")
    ys = as_points(y, "y")
    _check_same_dim(xs, ys)
    if not (0.0 < beta <= 2.0):
        raise ValueError(f"beta must lie in (0, 2], got {beta}")
    cross = pairwise_distances(xs, ys, beta).mean()
    within_x = pairwise_distances(xs, xs, beta).mean()
    within_y = pairwise_distances(ys, ys, beta).mean()
    return float(2.0 * cross - within_x - within_y)


def _gram(x, y, kernel: KernelSpec) -> np.ndarray:
    if kernel.kind == "gaussian":
        r = pairwise_euclidean(x, y)
        return np.exp(-(r * r) / (2.0 * kernel.bandwidth**2))
    # distance kernel: k(a, b) = (||a||^b + ||b||^b - ||a-b||^b) / 2
    beta = kernel.beta
    nx = np.linalg.norm(x, axis=1) ** beta
    ny = np.linalg.norm(y, axis=1) ** beta
    return 0.5 * (nx[:, None] + ny[None, :] - pairwise_distances(x, y, beta))


def mmd_squared(x, y, kernel: KernelSpec) -> float:
    """V-statistic squared maximum mean discrepancy under ``kernel``."""
    xs = as_points(x, "x")
    ys = as_points(y, "y")
    _check_same_dim(xs, ys)
    kxx = _gram(xs, xs, kernel).mean()
    kxy = _gram(xs, ys, kernel).mean()
    kyy = _gram(ys, ys, kernel).mean()
    return float(kxx - 2.0 * kxy + kyy)


def median_heuristic(x, y) -> float:
    """Gaussian-kernel bandwidth: median pairwise distance of the pooled sample.

    Zero self-distances (i == j) are excluded. Degenerate fallbacks: if the
    median is 0, use the smallest positive distance; if every distance is 0,
    use 1.
    """
    xs = as_points(x, "x")
    ys = as_points(y, "y")
    _check_same_dim(xs, ys)
    pooled = np.concatenate([xs, ys], axis=0)
    n = pooled.shape[0]
    if n < 2:
        raise ValueError("median_heuristic needs at least 2 pooled points")
    r = pairwise_euclidean(pooled, pooled)
    upper = r[np.triu_indices(n, k=1)]
    med = float(np.median(upper))
    if med > 0.0:
        return med
    positive = upper[upper > 0.0]
    return float(positive.min()) if positive.size else 1.0


def distance_kernel(x, y, beta: float) -> float:
    """(||x||^b + ||y||^b - ||x-y||^b) / 2 — the kernel whose MMD recovers ED/2."""
    if not (0.0 < beta < 2.0):
        raise ValueError(f"beta must lie in (0, 2), got {beta}")
    xv = np.asarray(x, dtype=float).reshape(-1)
    yv = np.asarray(y, dtype=float).reshape(-1)
    if xv.shape != yv.shape:
        raise ValueError(f"dimension mismatch: {xv.shape} vs {yv.shape}")
    nx = np.linalg.norm(xv) ** beta
    ny = np.linalg.norm(yv) ** beta
    nd = np.linalg.norm(xv - yv) ** beta
    return float(0.5 * (nx + ny - nd))


def crps(sample, x: float) -> float:
    """Continuous ranked probability score: the 1-D energy score at beta = 1."""
    p = as_points(sample, "sample")
    if p.shape[1] != 1:
        raise ValueError(f"crps is for 1-D samples, got {p.shape[1]} columns")
    return energy_score(p, [float(x)], beta=1.0)


def mean_difference(x, y) -> float:
    """L2 distance between the two sample means."""
    xs = as_points(x, "x")
    ys = as_points(y, "y")
    _check_same_dim(xs, ys)
    return float(np.linalg.norm(xs.mean(axis=0) - ys.mean(axis=0)))
