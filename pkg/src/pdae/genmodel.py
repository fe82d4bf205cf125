"""Ground-truth data-generating process.

A domain is a labelled condition: latents are drawn from an isotropic
Gaussian, shifted by ``shift_matrix @ label``, pushed through a mixing
function, and optionally padded with pure-noise columns. Also contains the
linear-SEM shift-intervention construction, which reduces to the same
mean-shift family with shift matrix (I - B^T)^{-1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numeric.rng import RngState, gaussian_sample


def as_label(a, n_elementary: int | None = None) -> np.ndarray:
    """Validate a perturbation label: finite 1-D float vector."""
    v = np.asarray(a, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("perturbation label contains non-finite entries")
    if n_elementary is not None and v.size != n_elementary:
        raise ValueError(f"label has length {v.size}, expected {n_elementary}")
    return v


def spectral_radius(mat) -> float:
    """Largest eigenvalue modulus.

    Computed by full eigendecomposition rather than power iteration: matrices
    rescaled to a target radius routinely carry near-tied dominant moduli
    (e.g. a complex pair plus a real eigenvalue at almost the same modulus),
    which no fixed-budget power scheme resolves reliably — and this value
    gates stability, so it has to be right.
    """
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"need a square matrix, got shape {m.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(m))))


@dataclass(frozen=True)
class MixingSpec:
    """How latents become observations.

    kind:
      complex_exp  z -> exp(z1) * (cos z2, sin z2); 2-D latents only
      identity     z -> z
      affine       z -> z @ matrix.T + offset
      linear_sem   identity on latents; tags the domain as SEM-generated
                   (the SEM structure itself enters through
                   sample_sem_intervention, not through mix)
    """

    kind: str
    matrix: np.ndarray | None = None
    offset: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "complex_exp":
            pass
        elif self.kind == "identity":
            pass
        elif self.kind == "affine":
            if self.matrix is None:
                raise ValueError("affine mixing needs a matrix")
            m = np.asarray(self.matrix, dtype=float)
            b = (
                np.zeros(m.shape[0])
                if self.offset is None
                else np.asarray(self.offset, dtype=float).reshape(-1)
            )
            if b.shape[0] != m.shape[0]:
                raise ValueError(
                    f"affine offset length {b.shape[0]} != matrix rows {m.shape[0]}"
                )
            object.__setattr__(self, "matrix", m)
            object.__setattr__(self, "offset", b)
        elif self.kind == "linear_sem":
            if self.matrix is None:
                raise ValueError("linear_sem mixing needs the adjacency matrix")
            b = np.asarray(self.matrix, dtype=float)
            rho = spectral_radius(b)
            if rho >= 1.0:
                raise ValueError(f"unstable SEM: spectral radius {rho:.6f} >= 1")
            object.__setattr__(self, "matrix", b)
        else:
            raise ValueError(f"unknown mixing kind {self.kind!r}")

    @staticmethod
    def complex_exp() -> "MixingSpec":
        return MixingSpec("complex_exp")

    @staticmethod
    def identity() -> "MixingSpec":
        return MixingSpec("identity")

    @staticmethod
    def affine(matrix, offset=None) -> "MixingSpec":
        return MixingSpec("affine", matrix=matrix, offset=offset)

    @staticmethod
    def linear_sem(adjacency) -> "MixingSpec":
        return MixingSpec("linear_sem", matrix=adjacency)

    def signal_dim(self, latent_dim: int) -> int:
        if self.kind == "complex_exp":
            return 2
        if self.kind == "affine":
            return self.matrix.shape[0]
        return latent_dim


@dataclass
class GroundTruthModel:
    shift_matrix: np.ndarray  # (latent_dim, n_elementary)
    base_mean: np.ndarray
    base_std: float
    mixing: MixingSpec
    noise_dims: int = 0
    noise_std: float = 0.0

    def __post_init__(self):
        self.shift_matrix = np.asarray(self.shift_matrix, dtype=float)
        self.base_mean = np.asarray(self.base_mean, dtype=float).reshape(-1)
        if self.shift_matrix.ndim != 2:
            raise ValueError("shift_matrix must be 2-D")
        if self.base_mean.shape[0] != self.shift_matrix.shape[0]:
            raise ValueError(
                f"base_mean length {self.base_mean.shape[0]} != latent dim "
                f"{self.shift_matrix.shape[0]}"
            )
        if self.base_std < 0 or self.noise_std < 0 or self.noise_dims < 0:
            raise ValueError("base_std, noise_std and noise_dims must be nonnegative")
        if self.mixing.kind == "complex_exp" and self.latent_dim != 2:
            raise ValueError("complex_exp mixing requires 2-D latents")

    @property
    def latent_dim(self) -> int:
        return self.shift_matrix.shape[0]

    @property
    def n_elementary(self) -> int:
        return self.shift_matrix.shape[1]

    @property
    def x_dim(self) -> int:
        return self.mixing.signal_dim(self.latent_dim) + self.noise_dims


@dataclass
class Domain:
    """One condition: observations plus the label that produced them.

    latents are optional diagnostics for alignment checks; estimators must
    never read them.
    """

    label: np.ndarray
    points: np.ndarray
    latents: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.label = as_label(self.label)
        self.points = np.asarray(self.points, dtype=float)
        if self.latents is not None:
            self.latents = np.asarray(self.latents, dtype=float)
            if self.latents.shape[0] != self.points.shape[0]:
                raise ValueError(
                    f"latents rows {self.latents.shape[0]} != points rows "
                    f"{self.points.shape[0]}"
                )

    @property
    def size(self) -> int:
        return self.points.shape[0]


def sample_latents(model: GroundTruthModel, a, n: int, rng: RngState) -> np.ndarray:
    """n rows from N(base_mean + shift_matrix @ a, base_std^2 * I)."""
    label = as_label(a, model.n_elementary)
    mean = model.base_mean + model.shift_matrix @ label
    return gaussian_sample(rng, mean, model.base_std, n)


def mix(spec: MixingSpec, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise ValueError(f"latents must be (n, d), got shape {z.shape}")
    if spec.kind == "complex_exp":
        if z.shape[1] != 2:
            raise ValueError(f"complex_exp needs 2 latent columns, got {z.shape[1]}")
        radius = np.exp(z[:, 0])
        return np.column_stack([radius * np.cos(z[:, 1]), radius * np.sin(z[:, 1])])
    if spec.kind == "affine":
        if z.shape[1] != spec.matrix.shape[1]:
            raise ValueError(
                f"affine mixing expects {spec.matrix.shape[1]} latent columns, "
                f"got {z.shape[1]}"
            )
        return z @ spec.matrix.T + spec.offset
    # identity and linear_sem: observations are the latents themselves
    return z.copy()


def complex_exp_inverse(x) -> np.ndarray:
    """Analytic inverse of complex_exp on the strip z2 in (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    radius = np.linalg.norm(x, axis=1)
    if np.any(radius == 0):
        raise ValueError("complex_exp never reaches the origin; cannot invert 0")
    return np.column_stack([np.log(radius), np.arctan2(x[:, 1], x[:, 0])])


def generate_domain(
    model: GroundTruthModel, a, n: int, rng: RngState, keep_latents: bool = True
) -> Domain:
    """Draw one domain: latents -> mixing -> appended noise columns."""
    if n < 1:
        raise ValueError(f"need n >= 1 points, got {n}")
    label = as_label(a, model.n_elementary)
    z = sample_latents(model, label, n, rng)
    x = mix(model.mixing, z)
    if model.noise_dims > 0:
        noise = gaussian_sample(rng, np.zeros(model.noise_dims), model.noise_std, n)
        x = np.concatenate([x, noise], axis=1)
    return Domain(label=label, points=x, latents=z if keep_latents else None)


def sem_to_meanshift(adjacency) -> np.ndarray:
    """Shift matrix (I - B^T)^{-1} of the stable linear SEM with weights B."""
    b = np.asarray(adjacency, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {b.shape}")
    rho = spectral_radius(b)
    if rho >= 1.0:
        raise ValueError(f"unstable SEM: spectral radius {rho:.6f} >= 1")
    return np.linalg.inv(np.eye(b.shape[0]) - b.T)


def sample_sem_intervention(
    adjacency, noise_std: float, a, n: int, rng: RngState
) -> np.ndarray:
    """Equilibrium latents of a shift-intervened linear SEM.

    Each row solves z = B^T z + eta_i + a with eta_i ~ N(0, noise_std^2 I),
    found by iterating the structural equations to their fixed point (the
    spectral radius bound makes the iteration a contraction). Deliberately
    avoids the closed-form (I - B^T)^{-1} route so results can be checked
    against the mean-shift construction built from sem_to_meanshift.
    """
    b = np.asarray(adjacency, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {b.shape}")
    rho = spectral_radius(b)
    if rho >= 1.0:
        raise ValueError(f"unstable SEM: spectral radius {rho:.6f} >= 1")
    shift = as_label(a, b.shape[0])
    exo = gaussian_sample(rng, np.zeros(b.shape[0]), noise_std, n) + shift
    z = exo.copy()
    for _ in range(100_000):
        nxt = exo + z @ b  # row form of z := B^T z + (eta + a)
        if np.max(np.abs(nxt - z)) < 1e-12 * max(1.0, float(np.max(np.abs(nxt)))):
            return nxt
        z = nxt
    raise RuntimeError("SEM fixed-point iteration did not converge")
