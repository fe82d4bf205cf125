"""Shared test utilities: identity-world model builders and finite differences."""

import numpy as np

from pdae.autoencoder import PdaeModel
from pdae.numeric.mlp import MlpParams
from pdae.numeric.rng import RngState


def identity_mlp(dim: int) -> MlpParams:
    return MlpParams([np.eye(dim)], [np.zeros(dim)])


def identity_world_model(shift_matrix, latent_dim=2) -> PdaeModel:
    """Oracle autoencoder for an identity-mixing world: encoder and decoder are
    exact identities, no decoder noise."""
    return PdaeModel(
        encoder=identity_mlp(latent_dim),
        decoder=identity_mlp(latent_dim),
        shift_matrix=np.asarray(shift_matrix, dtype=float),
        noise_dim=0,
        noise_std=0.0,
        beta=1.0,
    )


def model_arrays(model: PdaeModel):
    """Every trainable array of a PdaeModel, in a fixed order."""
    return model.encoder.flat_arrays() + model.decoder.flat_arrays() + [model.shift_matrix]


def grads_arrays(grads):
    return grads.encoder.flat_arrays() + grads.decoder.flat_arrays() + [grads.shift_matrix]


def fd_model_gradients(model, value_fn, h=1e-5, arrays=None):
    """Central finite differences of value_fn(model) w.r.t. the given arrays
    (default: every model array). value_fn must be deterministic in the model
    (fix its rng internally); arrays are perturbed in place and restored.
    """
    out = []
    for arr in model_arrays(model) if arrays is None else arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = value_fn(model)
            flat[i] = orig - h
            lo = value_fn(model)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * h)
        out.append(g)
    return out


def max_rel_err(analytic, numeric):
    """Worst absolute gradient gap over a scale floored at 1."""
    gap = max(float(np.max(np.abs(a - n))) if a.size else 0.0 for a, n in zip(analytic, numeric))
    scale = max(1.0, max(float(np.max(np.abs(n))) if n.size else 0.0 for n in numeric))
    return gap / scale


def loss_gradient_fd_trial(trial_seed: int, loss_name: str):
    """One seeded toy instance for a pdae loss gradient check.

    Returns the worst relative gradient error across all model arrays. Shared
    between the module tests and the acceptance gradient suite.
    """
    from pdae.autoencoder import (
        init_model,
        perturbation_loss,
        prior_loss,
        reconstruction_loss,
        sparsity_penalty,
    )

    rng = RngState(trial_seed)
    if loss_name == "sparsity":
        # deterministic and model-free: FD the column-norm penalty directly
        w = rng.child("w").normal((2, 3))
        _, analytic = sparsity_penalty(w)
        numeric = fd_model_gradients(None, lambda _: sparsity_penalty(w)[0], arrays=[w])
        return max_rel_err([analytic], numeric)
    beta = (1.0, 1.5)[trial_seed % 2]
    x_dim, latent_dim, k = 2, 2, 3
    model = init_model(
        rng.child("model"),
        x_dim=x_dim,
        latent_dim=latent_dim,
        n_elementary=k,
        hidden=(4,),
        noise_dim=1,
        noise_std=0.3,
        beta=beta,
    )
    batch = [
        (rng.child("x", 0).normal((5, x_dim)), np.zeros(k)),
        (rng.child("x", 1).normal((5, x_dim)) + 1.0, np.eye(k)[0]),
    ]
    loss_fn = {
        "perturbation": perturbation_loss,
        "reconstruction": reconstruction_loss,
        "prior": prior_loss,
    }[loss_name]

    def value(m):
        # fresh stream per evaluation: common random numbers across FD probes
        v, _ = loss_fn(m, batch, RngState(9000 + trial_seed))
        return v

    _, grads = loss_fn(model, batch, RngState(9000 + trial_seed))
    if loss_name == "reconstruction":
        # the encoder is deliberately detached here, so its parameters move the
        # value without moving the training gradient; probe the decoder only
        analytic = grads.decoder.flat_arrays()
        numeric = fd_model_gradients(model, value, arrays=model.decoder.flat_arrays())
    else:
        analytic = grads_arrays(grads)
        numeric = fd_model_gradients(model, value)
    return max_rel_err(analytic, numeric)
