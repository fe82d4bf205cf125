"""Numeric substrate: seeded RNG, pairwise distances, autodiff, MLP, Adam."""

from . import autodiff
from .adam import AdamState, adam_step
from .distances import paired_distances, pairwise_distances, pairwise_euclidean
from .mlp import MlpGrads, MlpParams, MlpTensors, init_mlp, loss_gradients, mlp_forward
from .rng import RngState, gaussian_sample

__all__ = [
    "AdamState",
    "MlpGrads",
    "MlpParams",
    "MlpTensors",
    "RngState",
    "adam_step",
    "autodiff",
    "gaussian_sample",
    "init_mlp",
    "loss_gradients",
    "mlp_forward",
    "paired_distances",
    "pairwise_distances",
    "pairwise_euclidean",
]
