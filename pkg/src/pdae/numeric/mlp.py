"""Dense MLP: parameters, deterministic forward pass, and graph-lifted apply.

Hidden layers use tanh (smooth and C-infinity, which the downstream gradient
checks and the curvature assumptions on decoders both want); the output layer
is linear. Weights are (d_in, d_out) so a batch forward is ``x @ w + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .rng import RngState

_ACTIVATIONS = ("tanh",)


@dataclass
class MlpParams:
    weights: list  # of np.ndarray (d_in, d_out)
    biases: list  # of np.ndarray (d_out,)
    hidden_activation: str = "tanh"

    def __post_init__(self):
        if self.hidden_activation not in _ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.hidden_activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be nonempty lists of equal length")
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float).reshape(-1) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2:
                raise ValueError(f"layer {i} weight must be 2-D, got shape {w.shape}")
            if b.shape[0] != w.shape[1]:
                raise ValueError(
                    f"layer {i}: bias length {b.shape[0]} != weight output dim {w.shape[1]}"
                )
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(
                    f"layer dims do not chain: layer {i - 1} emits "
                    f"{self.weights[i - 1].shape[1]}, layer {i} expects {w.shape[0]}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite parameters")

    @property
    def dims(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def flat_arrays(self):
        """All parameter arrays in a fixed order (weights then biases per layer)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_flat_arrays(self, arrays):
        arrays = list(arrays)
        for i in range(len(self.weights)):
            self.weights[i] = arrays[2 * i]
            self.biases[i] = arrays[2 * i + 1]

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
        )


def init_mlp(rng: RngState, dims) -> MlpParams:
    """Fan-in-scaled uniform init: U(-1/sqrt(d_in), 1/sqrt(d_in)) per layer."""
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"need at least [d_in, d_out] positive dims, got {dims}")
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(d_in)
        weights.append(rng.uniform(-bound, bound, size=(d_in, d_out)))
        biases.append(rng.uniform(-bound, bound, size=d_out))
    return MlpParams(weights, biases)


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != params.in_dim:
        raise ValueError(
            f"input has {x.shape[1]} columns but the first layer expects {params.in_dim}"
        )
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = np.tanh(h)
    return h[0] if squeeze else h


class MlpTensors:
    """The same network with parameters lifted to autodiff leaves."""

    def __init__(self, params: MlpParams):
        self.weights = [ad.Tensor(w) for w in params.weights]
        self.biases = [ad.Tensor(b) for b in params.biases]

    def apply(self, x) -> ad.Tensor:
        h = ad.const(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.add(ad.matmul(h, w), b)
            if i < last:
                h = ad.tanh(h)
        return h

    def leaves(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


@dataclass
class MlpGrads:
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    def flat_arrays(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def loss_gradients(params: MlpParams, loss_fn, x=None):
    """Differentiate a scalar loss built on the lifted network.

    loss_fn(net)    -> scalar Tensor                      (x is None)
    loss_fn(net, x) -> scalar Tensor, x lifted to a leaf  (x given)

    Returns MlpGrads, or (MlpGrads, dloss/dx) when x is given. The loss must
    be built from the supported autodiff primitives.
    """
    net = MlpTensors(params)
    if x is None:
        loss = loss_fn(net)
        g = ad.backward(loss)
        return _collect(net, g)
    xt = ad.Tensor(x)
    loss = loss_fn(net, xt)
    g = ad.backward(loss)
    return _collect(net, g), g.of(xt)


def _collect(net: MlpTensors, g: ad.Grads) -> MlpGrads:
    return MlpGrads(
        weights=[g.of(w) for w in net.weights],
        biases=[g.of(b) for b in net.biases],
    )
