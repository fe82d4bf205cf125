"""Reference methods: pooling, pseudobulking, and linear regression on means."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .genmodel import as_label


@dataclass
class MeanModel:
    intercept: np.ndarray  # (x_dim,)
    coef: np.ndarray  # (x_dim, n_elementary)

    def __post_init__(self):
        self.intercept = np.asarray(self.intercept, dtype=float).reshape(-1)
        self.coef = np.asarray(self.coef, dtype=float)
        if not (np.all(np.isfinite(self.intercept)) and np.all(np.isfinite(self.coef))):
            raise ValueError("mean model has non-finite entries")


def pool_all(domains) -> np.ndarray:
    domains = list(domains)
    if not domains or all(d.size == 0 for d in domains):
        raise ValueError("nothing to pool")
    return np.concatenate([d.points for d in domains], axis=0)


def pseudobulk(domains, a_test) -> np.ndarray:
    """Pool the single-perturbation domains involved in the test label.

    A domain is involved if its label has exactly one nonzero coordinate k and
    a_test[k] != 0 (any magnitude). No involved singles -> pool everything.
    """
    domains = list(domains)
    label = as_label(a_test)
    picked = []
    for d in domains:
        nz = np.nonzero(d.label)[0]
        if nz.size == 1 and label[nz[0]] != 0:
            picked.append(d.points)
    if not picked:
        return pool_all(domains)
    return np.concatenate(picked, axis=0)


def fit_mean_model(domains) -> MeanModel:
    """Least squares of per-domain observation means on labels, with intercept.

    Rank-deficient designs resolve to the minimum-norm solution.
    """
    domains = list(domains)
    if len(domains) < 2:
        raise ValueError(f"need >= 2 domains to fit a mean model, got {len(domains)}")
    labels = np.stack([d.label for d in domains])  # (n_dom, k)
    means = np.stack([d.points.mean(axis=0) for d in domains])  # (n_dom, x_dim)
    design = np.concatenate([np.ones((labels.shape[0], 1)), labels], axis=1)
    sol, *_ = np.linalg.lstsq(design, means, rcond=None)  # (1 + k, x_dim)
    return MeanModel(intercept=sol[0], coef=sol[1:].T)


def predict_mean(model: MeanModel, a_test) -> np.ndarray:
    label = as_label(a_test, model.coef.shape[1])
    return model.intercept + model.coef @ label


def mean_shift_distribution(reference, predicted_mean) -> np.ndarray:
    """Translate the reference sample so its mean lands on predicted_mean.

    Keeps every central moment of the reference shape; only the location moves.
    """
    ref = np.asarray(reference, dtype=float)
    target = np.asarray(predicted_mean, dtype=float).reshape(-1)
    if ref.ndim != 2 or ref.shape[1] != target.shape[0]:
        raise ValueError(
            f"reference shape {ref.shape} incompatible with mean of length {target.shape[0]}"
        )
    return ref + (target - ref.mean(axis=0))
