"""Distributional perturbation autoencoder: an energy-score-trained
encoder/shift/decoder model that predicts the full observation distribution
of unseen perturbation combinations, plus the synthetic benchmark, baselines
and structural-identifiability checks around it."""

__version__ = "0.1.0"

from . import autoencoder, baselines, genmodel, harness, metrics, numeric

__all__ = [
    "__version__",
    "autoencoder",
    "baselines",
    "genmodel",
    "harness",
    "metrics",
    "numeric",
]
