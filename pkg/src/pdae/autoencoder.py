"""Perturbation-distribution autoencoder.

An encoder maps observations to latents, a learned shift matrix transports
latents between labelled conditions by adding ``shift_matrix @ (a_tgt -
a_src)``, and a stochastic decoder (fresh Gaussian noise concatenated to each
latent row) maps transported latents back to observation space. Training
minimizes the negative energy score of decoded synthetic sets against real
observations over all ordered domain pairs; optional reconstruction, prior,
and column-sparsity terms attach to specific parameter groups only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .genmodel import Domain, as_label
from .metrics import KernelSpec, median_heuristic, mmd_squared
from .numeric import autodiff as ad
from .numeric.adam import AdamState, adam_step
from .numeric.mlp import MlpGrads, MlpParams, MlpTensors, init_mlp, mlp_forward
from .numeric.rng import RngState, gaussian_sample


@dataclass
class PdaeModel:
    encoder: MlpParams  # x_dim -> latent_dim
    decoder: MlpParams  # latent_dim + noise_dim -> x_dim
    shift_matrix: np.ndarray  # (latent_dim, n_elementary)
    noise_dim: int
    noise_std: float
    beta: float = 1.0

    def __post_init__(self):
        self.shift_matrix = np.asarray(self.shift_matrix, dtype=float)
        if self.shift_matrix.ndim != 2:
            raise ValueError("shift_matrix must be 2-D")
        if self.encoder.out_dim != self.shift_matrix.shape[0]:
            raise ValueError(
                f"encoder emits {self.encoder.out_dim} dims but shift_matrix has "
                f"{self.shift_matrix.shape[0]} rows"
            )
        if self.decoder.in_dim != self.encoder.out_dim + self.noise_dim:
            raise ValueError(
                f"decoder expects {self.decoder.in_dim} inputs, need latent_dim + "
                f"noise_dim = {self.encoder.out_dim + self.noise_dim}"
            )
        if not (0.0 < self.beta < 2.0):
            raise ValueError(f"beta must lie in (0, 2), got {self.beta}")
        if self.noise_dim < 0 or self.noise_std < 0:
            raise ValueError("noise_dim and noise_std must be nonnegative")

    @property
    def x_dim(self) -> int:
        return self.encoder.in_dim

    @property
    def latent_dim(self) -> int:
        return self.encoder.out_dim

    @property
    def n_elementary(self) -> int:
        return self.shift_matrix.shape[1]

    def copy(self) -> "PdaeModel":
        return PdaeModel(
            encoder=self.encoder.copy(),
            decoder=self.decoder.copy(),
            shift_matrix=self.shift_matrix.copy(),
            noise_dim=self.noise_dim,
            noise_std=self.noise_std,
            beta=self.beta,
        )


def init_model(
    rng: RngState,
    x_dim: int,
    latent_dim: int,
    n_elementary: int,
    hidden=(64, 64, 64, 64),
    noise_dim: int = 2,
    noise_std: float = 0.1,
    beta: float = 1.0,
) -> PdaeModel:
    encoder = init_mlp(rng.child("enc"), [x_dim, *hidden, latent_dim])
    decoder = init_mlp(rng.child("dec"), [latent_dim + noise_dim, *hidden, x_dim])
    bound = 1.0 / np.sqrt(n_elementary)
    shift = rng.child("shift").uniform(-bound, bound, size=(latent_dim, n_elementary))
    return PdaeModel(encoder, decoder, shift, noise_dim, noise_std, beta)


@dataclass
class TrainConfig:
    lambda_rec: float = 0.0
    lambda_prior: float = 0.0
    lambda_sparsity: float = 0.0
    lr_encoder: float = 0.005
    lr_decoder: float = 0.005
    lr_shift: float = 0.005
    batch_size: int = 1024
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 4:
            raise ValueError(f"batch_size must be >= 4, got {self.batch_size}")
        if min(self.lr_encoder, self.lr_decoder, self.lr_shift) <= 0:
            raise ValueError("all learning rates must be > 0")
        if min(self.lambda_rec, self.lambda_prior, self.lambda_sparsity) < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def uniform_weights(n_domains: int) -> np.ndarray:
    return np.full(n_domains, 1.0 / n_domains)


def control_weights(n_domains: int) -> np.ndarray:
    w = np.zeros(n_domains)
    w[0] = 1.0
    return w


# --------------------------------------------------------------------------
# forward pieces


def encode(model: PdaeModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.x_dim:
        raise ValueError(f"expected (n, {model.x_dim}) observations, got shape {x.shape}")
    return mlp_forward(model.encoder, x)


def transport(model: PdaeModel, z, a_src, a_tgt) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    src = as_label(a_src, model.n_elementary)
    tgt = as_label(a_tgt, model.n_elementary)
    return z + model.shift_matrix @ (tgt - src)


def decode(model: PdaeModel, z, rng: RngState) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[1] != model.latent_dim:
        raise ValueError(f"expected (n, {model.latent_dim}) latents, got shape {z.shape}")
    if model.noise_dim > 0:
        noise = gaussian_sample(rng, np.zeros(model.noise_dim), model.noise_std, z.shape[0])
        z = np.concatenate([z, noise], axis=1)
    return mlp_forward(model.decoder, z)


# --------------------------------------------------------------------------
# losses (shared graph machinery)


@dataclass
class PdaeGrads:
    encoder: MlpGrads
    decoder: MlpGrads
    shift_matrix: np.ndarray


class _Lifted:
    """Model parameters lifted to autodiff leaves, plus cached encodings."""

    def __init__(self, model: PdaeModel, batch):
        self.model = model
        self.enc = MlpTensors(model.encoder)
        self.dec = MlpTensors(model.decoder)
        self.shift = ad.Tensor(model.shift_matrix)
        self.batch = [(np.asarray(x, dtype=float), as_label(a, model.n_elementary)) for x, a in batch]
        self.encodings = [self.enc.apply(ad.const(x)) for x, _ in self.batch]

    def shift_row(self, delta_label) -> ad.Tensor:
        row = np.asarray(delta_label, dtype=float)[None, :]
        return ad.matmul(ad.const(row), ad.transpose(self.shift))  # (1, latent_dim)

    def decode_graph(self, z: ad.Tensor, rng: RngState) -> ad.Tensor:
        m = self.model
        if m.noise_dim > 0:
            noise = gaussian_sample(rng, np.zeros(m.noise_dim), m.noise_std, z.value.shape[0])
            z = ad.concat_cols(z, ad.const(noise))
        return self.dec.apply(z)

    def collect(self, g: ad.Grads) -> PdaeGrads:
        return PdaeGrads(
            encoder=MlpGrads([g.of(w) for w in self.enc.weights], [g.of(b) for b in self.enc.biases]),
            decoder=MlpGrads([g.of(w) for w in self.dec.weights], [g.of(b) for b in self.dec.biases]),
            shift_matrix=g.of(self.shift),
        )

    def zero_grads(self) -> PdaeGrads:
        return self.collect(ad.Grads({}))


def _check_batch(batch, minimum=1):
    if len(batch) == 0:
        raise ValueError("empty batch")
    for i, (x, _) in enumerate(batch):
        if np.asarray(x).shape[0] < minimum:
            raise ValueError(
                f"domain {i} contributes {np.asarray(x).shape[0]} points; need >= {minimum}"
            )


def _pert_graph(lift: _Lifted, rng: RngState) -> ad.Tensor:
    """Negative energy score of transported+decoded sets against every real set,
    summed over ordered domain pairs (including e -> e), normalized by the
    squared number of domains. Within-sample term is the U-statistic over
    distinct synthetic pairs."""
    beta = lift.model.beta
    n_dom = len(lift.batch)
    blocks, spans = [], []
    start = 0
    for e in range(n_dom):
        z_e = lift.encodings[e]
        m_e = z_e.value.shape[0]
        for h in range(n_dom):
            delta = lift.batch[h][1] - lift.batch[e][1]
            blocks.append(ad.add(z_e, lift.shift_row(delta)))
            spans.append((e, h, start, start + m_e))
            start += m_e
    decoded = lift.decode_graph(ad.concat_rows(blocks), rng)
    total = None
    for e, h, s0, s1 in spans:
        synth = ad.rows(decoded, s0, s1)
        m = s1 - s0
        cross = ad.mean_all(ad.pairwise_pow(synth, ad.const(lift.batch[h][0]), beta))
        within = ad.smul(
            ad.sum_all(ad.pairwise_pow(synth, synth, beta)), 1.0 / (2.0 * m * (m - 1))
        )
        term = ad.sub(cross, within)
        total = term if total is None else ad.add(total, term)
    return ad.smul(total, 1.0 / float(n_dom * n_dom))


def _rec_graph(lift: _Lifted, rng: RngState) -> ad.Tensor:
    """Energy-score reconstruction: two independent decodes of each (frozen)
    encoding. Encodings enter as constants, so no gradient reaches the encoder."""
    beta = lift.model.beta
    x_all = np.concatenate([x for x, _ in lift.batch], axis=0)
    z_all = np.concatenate([z.value for z in lift.encodings], axis=0)
    n = z_all.shape[0]
    stacked = lift.decode_graph(ad.const(np.concatenate([z_all, z_all], axis=0)), rng)
    d1 = ad.rows(stacked, 0, n)
    d2 = ad.rows(stacked, n, 2 * n)
    t1 = ad.mean_all(ad.paired_pow(d1, ad.const(x_all), beta))
    t2 = ad.mean_all(ad.paired_pow(d2, ad.const(x_all), beta))
    t3 = ad.mean_all(ad.paired_pow(d1, d2, beta))
    return ad.smul(ad.sub(ad.add(t1, t2), t3), 0.5)


def _prior_graph(lift: _Lifted, rng: RngState) -> ad.Tensor:
    """Negative energy score of pooled estimated basal states against fresh
    standard-normal draws (one per pooled point)."""
    beta = lift.model.beta
    basal = []
    for (x, label), z in zip(lift.batch, lift.encodings):
        basal.append(ad.sub(z, lift.shift_row(label)))
    pooled = ad.concat_rows(basal)
    n = pooled.value.shape[0]
    if n < 2:
        raise ValueError(f"prior loss needs >= 2 pooled points, got {n}")
    draws = gaussian_sample(rng, np.zeros(lift.model.latent_dim), 1.0, n)
    cross = ad.mean_all(ad.pairwise_pow(ad.const(draws), pooled, beta))
    within = ad.smul(
        ad.sum_all(ad.pairwise_pow(pooled, pooled, beta)), 1.0 / (2.0 * n * (n - 1))
    )
    return ad.sub(cross, within)


def perturbation_loss(model: PdaeModel, batch, rng: RngState):
    """(value, PdaeGrads) of the transport loss on a multi-domain batch."""
    _check_batch(batch, minimum=2)
    lift = _Lifted(model, batch)
    loss = _pert_graph(lift, rng)
    return loss.item(), lift.collect(ad.backward(loss))


def reconstruction_loss(model: PdaeModel, batch, rng: RngState):
    """(value, PdaeGrads); encoder gradients are structurally zero."""
    _check_batch(batch, minimum=1)
    lift = _Lifted(model, batch)
    loss = _rec_graph(lift, rng)
    return loss.item(), lift.collect(ad.backward(loss))


def prior_loss(model: PdaeModel, batch, rng: RngState):
    """(value, PdaeGrads) of the basal-state-vs-standard-normal score."""
    _check_batch(batch, minimum=1)
    lift = _Lifted(model, batch)
    loss = _prior_graph(lift, rng)
    return loss.item(), lift.collect(ad.backward(loss))


def sparsity_penalty(shift_matrix):
    """Sum of column 2-norms and its (sub)gradient; zero columns get gradient 0."""
    w = np.asarray(shift_matrix, dtype=float)
    norms = np.linalg.norm(w, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = np.where(norms > 0, w / np.where(norms > 0, norms, 1.0), 0.0)
    return float(norms.sum()), grad


# --------------------------------------------------------------------------
# training


@dataclass
class OptimizerStates:
    encoder: AdamState
    decoder: AdamState
    shift: AdamState

    @classmethod
    def init_for(cls, model: PdaeModel) -> "OptimizerStates":
        return cls(
            encoder=AdamState.init_like(model.encoder.flat_arrays()),
            decoder=AdamState.init_like(model.decoder.flat_arrays()),
            shift=AdamState.init_like([model.shift_matrix]),
        )


def train_step(model: PdaeModel, batch, config: TrainConfig, opt: OptimizerStates, rng: RngState):
    """One update: decoder on pert + lambda_rec * rec; encoder on pert +
    lambda_prior * prior; shift matrix on pert + lambda_prior * prior +
    lambda_sparsity * sparsity. Each group steps with its own Adam state and
    rate. Returns the component values; the model is updated in place."""
    if len(batch) < 2:
        raise ValueError(f"a training batch must span >= 2 domains, got {len(batch)}")
    _check_batch(batch, minimum=2)
    lift = _Lifted(model, batch)
    pert_t = _pert_graph(lift, rng)
    rec_t = _rec_graph(lift, rng)
    prior_t = _prior_graph(lift, rng)
    spars_val, spars_grad = sparsity_penalty(model.shift_matrix)
    values = {
        "pert": pert_t.item(),
        "rec": rec_t.item(),
        "prior": prior_t.item(),
        "sparsity": spars_val,
    }
    for name, v in values.items():
        if not np.isfinite(v):
            raise FloatingPointError(f"non-finite {name} loss ({v}); aborting step")

    g_pert = lift.collect(ad.backward(pert_t))
    g_rec = lift.collect(ad.backward(rec_t)) if config.lambda_rec > 0 else None
    g_prior = lift.collect(ad.backward(prior_t)) if config.lambda_prior > 0 else None

    def combine(part_sets):
        # part_sets: list of (coef, list-of-arrays); zero coefs already dropped
        base = [c * a for a in part_sets[0][1]] if (c := part_sets[0][0]) != 1.0 else [
            a.copy() for a in part_sets[0][1]
        ]
        for coef, arrays in part_sets[1:]:
            for i, a in enumerate(arrays):
                base[i] = base[i] + coef * a
        return base

    dec_parts = [(1.0, g_pert.decoder.flat_arrays())]
    if g_rec is not None:
        dec_parts.append((config.lambda_rec, g_rec.decoder.flat_arrays()))
    enc_parts = [(1.0, g_pert.encoder.flat_arrays())]
    w_parts = [(1.0, [g_pert.shift_matrix])]
    if g_prior is not None:
        enc_parts.append((config.lambda_prior, g_prior.encoder.flat_arrays()))
        w_parts.append((config.lambda_prior, [g_prior.shift_matrix]))
    if config.lambda_sparsity > 0:
        w_parts.append((config.lambda_sparsity, [spars_grad]))

    new_dec, _ = adam_step(model.decoder.flat_arrays(), combine(dec_parts), opt.decoder, config.lr_decoder)
    new_enc, _ = adam_step(model.encoder.flat_arrays(), combine(enc_parts), opt.encoder, config.lr_encoder)
    new_w, _ = adam_step([model.shift_matrix], combine(w_parts), opt.shift, config.lr_shift)
    model.decoder.set_flat_arrays(new_dec)
    model.encoder.set_flat_arrays(new_enc)
    model.shift_matrix = new_w[0]
    return values


def _batch_counts(n_dom: int, batch_size: int, step: int):
    base = batch_size // n_dom
    extra = batch_size % n_dom
    counts = [base] * n_dom
    for j in range(extra):  # the domains receiving a spare point rotate
        counts[(step + j) % n_dom] += 1
    return counts


def train(model: PdaeModel, domains, config: TrainConfig):
    """Epoch loop over shuffled per-domain minibatches. Returns (model, history);
    history holds the per-epoch mean of every loss component."""
    domains = list(domains)
    if not domains or any(d.size < 1 for d in domains):
        raise ValueError("all domains must be nonempty")
    n_dom = len(domains)
    base = config.batch_size // n_dom
    if n_dom >= 2 and base < 2:
        raise ValueError(
            f"batch_size {config.batch_size} gives {base} points per domain; need >= 2"
        )
    rng = RngState(config.seed).child("train")
    opt = OptimizerStates.init_for(model)
    total = sum(d.size for d in domains)
    steps = max(1, total // config.batch_size)
    history = {"pert": [], "rec": [], "prior": [], "sparsity": []}
    for _ in range(config.epochs):
        perms = [rng.permutation(d.size) for d in domains]
        ptrs = [0] * n_dom
        sums = dict.fromkeys(history, 0.0)
        for step in range(steps):
            counts = _batch_counts(n_dom, config.batch_size, step)
            batch = []
            for e, d in enumerate(domains):
                c = min(counts[e], d.size)
                if ptrs[e] + c <= d.size:
                    idx = perms[e][ptrs[e] : ptrs[e] + c]
                else:  # wrap within the epoch's permutation
                    short = ptrs[e] + c - d.size
                    idx = np.concatenate([perms[e][ptrs[e] :], perms[e][:short]])
                ptrs[e] = (ptrs[e] + c) % d.size
                batch.append((d.points[idx], d.label))
            values = train_step(model, batch, config, opt, rng)
            for k, v in values.items():
                sums[k] += v
        for k in history:
            history[k].append(sums[k] / steps)
    return model, history


# --------------------------------------------------------------------------
# prediction and fit diagnostics


def predict(model: PdaeModel, domains, a_test, weights, rng: RngState, size: int | None = None) -> np.ndarray:
    """Sample the mixture over source domains: every domain's observations are
    encoded, transported to ``a_test`` and decoded; the output resamples those
    pools with the given domain weights (uniform within a domain)."""
    domains = list(domains)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != len(domains):
        raise ValueError(f"{w.size} weights for {len(domains)} source domains")
    if np.any(w < 0):
        raise ValueError("prediction weights must be nonnegative")
    if w.sum() <= 0:
        raise ValueError("prediction weights sum to zero")
    w = w / w.sum()
    label = as_label(a_test, model.n_elementary)
    n_out = int(size) if size is not None else max(d.size for d in domains)
    counts = rng.multinomial(n_out, w)
    parts = []
    for d, c in zip(domains, counts):
        pool = decode(model, transport(model, encode(model, d.points), d.label, label), rng)
        if c > 0:
            parts.append(pool[rng.integers(0, pool.shape[0], int(c))])
    return np.concatenate(parts, axis=0)


def goodness_of_fit(model: PdaeModel, domains, rng: RngState) -> np.ndarray:
    """Matrix of MMD^2 (Gaussian kernel, median-heuristic bandwidth) between the
    transported prediction for each ordered domain pair and the real target
    domain. Entry (e, h) scores domain e's data transported to domain h."""
    domains = list(domains)
    for d in domains:
        if d.size < 2:
            raise ValueError("goodness_of_fit needs >= 2 points per domain")
    n = len(domains)
    out = np.zeros((n, n))
    for e, src in enumerate(domains):
        z = encode(model, src.points)
        for h, tgt in enumerate(domains):
            synth = decode(model, transport(model, z, src.label, tgt.label), rng)
            kernel = KernelSpec.gaussian(median_heuristic(synth, tgt.points))
            out[e, h] = mmd_squared(synth, tgt.points, kernel)
    return out
