"""Bias-corrected Adam over flat lists of parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: list = field(default_factory=list)  # first-moment accumulators
    v: list = field(default_factory=list)  # second-moment accumulators
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init_like(cls, arrays, **kw) -> "AdamState":
        arrays = list(arrays)
        return cls(
            m=[np.zeros_like(np.asarray(a, dtype=float)) for a in arrays],
            v=[np.zeros_like(np.asarray(a, dtype=float)) for a in arrays],
            **kw,
        )


def adam_step(arrays, grads, state: AdamState, lr: float):
    """One update; returns (new arrays, state). State is advanced in place.

    Rejects non-finite gradients outright (a poisoned accumulator would
    silently corrupt every later step), surfacing which array failed.
    """
    arrays, grads = list(arrays), list(grads)
    if lr <= 0:
        raise ValueError(f"learning rate must be > 0, got {lr}")
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise ValueError(
            f"parameter/gradient/state count mismatch: "
            f"{len(arrays)}/{len(grads)}/{len(state.m)}"
        )
    for i, (a, g) in enumerate(zip(arrays, grads)):
        if a.shape != g.shape:
            raise ValueError(f"array {i}: shape {a.shape} vs gradient {g.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient for array {i} (shape {g.shape}); step rejected"
            )
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    out = []
    for i, (a, g) in enumerate(zip(arrays, grads)):
        state.m[i] = b1 * state.m[i] + (1 - b1) * g
        state.v[i] = b2 * state.v[i] + (1 - b2) * g * g
        m_hat = state.m[i] / (1 - b1**t)
        v_hat = state.v[i] / (1 - b2**t)
        out.append(a - lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out, state
