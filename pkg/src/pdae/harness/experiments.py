"""End-to-end synthetic benchmark: generate domains, train, evaluate, sweep.

The canonical design is 2-D latents under the complex-exponential mixing with
three elementary perturbations whose latent shifts are the columns (1,0),
(0,1), (1,1); training observes the control plus the three single
perturbations, and evaluation scores every method's predicted distribution
against fresh ground-truth draws on the frozen ID/OOD label suite.

Two entry points:

* ``run_simulation`` — the main benchmark table (five methods, three metrics,
  aggregated over seeds);
* ``run_noise_sweep`` — the robustness experiment that appends pure-noise
  observation columns of increasing scale and re-runs the ID evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..autoencoder import (
    PdaeModel,
    TrainConfig,
    control_weights,
    init_model,
    predict,
    train,
    uniform_weights,
)
from ..baselines import (
    fit_mean_model,
    mean_shift_distribution,
    pool_all,
    predict_mean,
    pseudobulk,
)
from ..genmodel import GroundTruthModel, MixingSpec, generate_domain
from ..numeric.distances import pairwise_euclidean
from ..numeric.rng import RngState
from .labels import N_ELEMENTARY, make_test_suite

METHODS = ("pdae", "linear_regression", "pseudobulk", "pool_all", "oracle")

SWEEP_NOISE_LEVELS = (0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 10.0)


def canonical_shift_matrix() -> np.ndarray:
    """Latent shift columns (1,0), (0,1), (1,1) of the 2-D design."""
    return np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])


def canonical_train_labels() -> tuple[np.ndarray, ...]:
    """Control plus the three single elementary perturbations at dose 1."""
    return (np.zeros(N_ELEMENTARY),) + tuple(np.eye(N_ELEMENTARY))


@dataclass
class ExperimentConfig:
    """Everything a benchmark run depends on, so runs are pure in (config)."""

    latent_dim: int = 2
    n_elementary: int = N_ELEMENTARY
    shift_matrix: np.ndarray = field(default_factory=canonical_shift_matrix)
    train_labels: tuple = field(default_factory=canonical_train_labels)
    base_std: float = 0.25
    noise_dims: int = 0  # appended pure-noise observation columns
    obs_noise_std: float = 0.0  # scale of those columns
    n_per_domain: int = 4096
    train: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=1024, epochs=500))
    hidden: tuple = (64, 64, 64, 64)
    beta: float = 1.0
    model_noise_dim: int | None = None  # None: match the generator's noise_dims
    model_noise_std: float = 0.1
    weights_mode: str = "uniform"  # "uniform" | "control"
    seeds: tuple = (0, 1)
    suite_seed: int = 7
    eval_points: int = 2048

    def __post_init__(self):
        self.shift_matrix = np.asarray(self.shift_matrix, dtype=float)
        self.train_labels = tuple(
            np.asarray(a, dtype=float).reshape(-1) for a in self.train_labels
        )
        if self.shift_matrix.shape != (self.latent_dim, self.n_elementary):
            raise ValueError(
                f"shift_matrix shape {self.shift_matrix.shape} != "
                f"({self.latent_dim}, {self.n_elementary})"
            )
        if not self.train_labels or self.train_labels[0].shape != (self.n_elementary,):
            raise ValueError("train_labels must be nonempty vectors of length n_elementary")
        if np.any(self.train_labels[0] != 0.0):
            raise ValueError("the first training label must be the zero (reference) label")
        if any(a.shape != (self.n_elementary,) for a in self.train_labels):
            raise ValueError("every training label must have length n_elementary")
        if self.n_per_domain < 2:
            raise ValueError(f"n_per_domain must be >= 2, got {self.n_per_domain}")
        if self.eval_points < 2:
            raise ValueError(f"eval_points must be >= 2, got {self.eval_points}")
        if self.weights_mode not in ("uniform", "control"):
            raise ValueError(f"weights_mode must be 'uniform' or 'control', got {self.weights_mode!r}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.noise_dims < 0 or self.obs_noise_std < 0 or self.model_noise_std < 0:
            raise ValueError("noise settings must be nonnegative")

    @property
    def resolved_model_noise_dim(self) -> int:
        return self.noise_dims if self.model_noise_dim is None else self.model_noise_dim

    @staticmethod
    def desk(**overrides) -> "ExperimentConfig":
        """Laptop-scale defaults: 4096 points/domain, 500 epochs, 2 seeds."""
        return ExperimentConfig(**overrides)

    @staticmethod
    def paper(**overrides) -> "ExperimentConfig":
        """Full-scale protocol: 2^14 points/domain, 2000 epochs, batch 2^12, 5 seeds."""
        base = dict(
            n_per_domain=2**14,
            train=TrainConfig(batch_size=2**12, epochs=2000),
            seeds=(0, 1, 2, 3, 4),
            eval_points=4096,
        )
        base.update(overrides)
        return ExperimentConfig(**base)


def truth_model(config: ExperimentConfig) -> GroundTruthModel:
    return GroundTruthModel(
        shift_matrix=config.shift_matrix,
        base_mean=np.zeros(config.latent_dim),
        base_std=config.base_std,
        mixing=MixingSpec.complex_exp(),
        noise_dims=config.noise_dims,
        noise_std=config.obs_noise_std,
    )


# --------------------------------------------------------------------------
# scoring


def score_samples(predicted, reference, reference_self=None):
    """(energy distance, Gaussian MMD^2 at the median-heuristic bandwidth,
    mean L2 difference) of two samples, from shared distance blocks.

    Reproduces ``metrics.energy_distance`` / ``metrics.mmd_squared`` /
    ``metrics.mean_difference`` exactly while computing each pairwise block
    once; ``reference_self`` lets callers reuse the reference's own block
    across methods scored against the same reference sample.
    """
    p = np.asarray(predicted, dtype=float)
    r = np.asarray(reference, dtype=float)
    if p.ndim != 2 or r.ndim != 2 or p.shape[1] != r.shape[1]:
        raise ValueError(f"need (n, d) samples of equal dimension, got {p.shape} vs {r.shape}")
    dpp = pairwise_euclidean(p, p)
    drr = pairwise_euclidean(r, r) if reference_self is None else reference_self
    dpr = pairwise_euclidean(p, r)
    ed = float(2.0 * dpr.mean() - dpp.mean() - drr.mean())

    pooled = np.concatenate(
        [
            dpp[np.triu_indices(p.shape[0], k=1)],
            dpr.ravel(),
            drr[np.triu_indices(r.shape[0], k=1)],
        ]
    )
    bw = float(np.median(pooled))
    if bw <= 0.0:
        positive = pooled[pooled > 0.0]
        bw = float(positive.min()) if positive.size else 1.0
    s2 = 2.0 * bw * bw
    mmd2 = float(
        np.exp(-(dpp * dpp) / s2).mean()
        - 2.0 * np.exp(-(dpr * dpr) / s2).mean()
        + np.exp(-(drr * drr) / s2).mean()
    )
    mdiff = float(np.linalg.norm(p.mean(axis=0) - r.mean(axis=0)))
    return ed, mmd2, mdiff


# --------------------------------------------------------------------------
# the report


@dataclass(frozen=True)
class EvalRow:
    method: str
    case_id: str
    kind: str  # "id" | "ood"
    arity: str  # "single" | "double"
    seed: int
    energy_distance: float
    mmd_squared: float
    mean_diff: float


@dataclass(frozen=True)
class AggregateRow:
    method: str
    kind: str
    n_seeds: int
    energy_distance_mean: float
    energy_distance_std: float
    mmd_squared_mean: float
    mmd_squared_std: float
    mean_diff_mean: float
    mean_diff_std: float


@dataclass
class SeedArtifacts:
    seed: int
    truth: GroundTruthModel
    domains: list  # training Domains, latents retained
    model: PdaeModel
    history: dict


@dataclass
class EvalReport:
    rows: list
    artifacts: list | None = None

    def aggregate(self) -> list:
        """Per (method, kind): mean over that seed's cases first, then mean and
        sample std (ddof=1) across seeds, so seed-to-seed spread is what the
        std column reports."""
        per_seed = {}
        for r in self.rows:
            per_seed.setdefault((r.method, r.kind, r.seed), []).append(
                (r.energy_distance, r.mmd_squared, r.mean_diff)
            )
        grouped = {}
        for (method, kind, _seed), vals in sorted(per_seed.items()):
            grouped.setdefault((method, kind), []).append(
                np.asarray(vals, dtype=float).mean(axis=0)
            )
        out = []
        order = {m: i for i, m in enumerate(METHODS)}
        for (method, kind), seed_means in sorted(
            grouped.items(), key=lambda kv: (order.get(kv[0][0], len(order)), kv[0])
        ):
            arr = np.stack(seed_means)
            mean = arr.mean(axis=0)
            std = arr.std(axis=0, ddof=1) if arr.shape[0] > 1 else np.zeros(3)
            out.append(
                AggregateRow(
                    method=method,
                    kind=kind,
                    n_seeds=arr.shape[0],
                    energy_distance_mean=float(mean[0]),
                    energy_distance_std=float(std[0]),
                    mmd_squared_mean=float(mean[1]),
                    mmd_squared_std=float(std[1]),
                    mean_diff_mean=float(mean[2]),
                    mean_diff_std=float(std[2]),
                )
            )
        return out

    def mean_metric(self, method: str, kind: str, metric: str = "energy_distance") -> float:
        for agg in self.aggregate():
            if agg.method == method and agg.kind == kind:
                return getattr(agg, f"{metric}_mean")
        raise KeyError(f"no rows for method={method!r} kind={kind!r}")


# --------------------------------------------------------------------------
# the runs


def _subsample(points: np.ndarray, n: int, rng: RngState) -> np.ndarray:
    if points.shape[0] <= n:
        return points
    return points[rng.permutation(points.shape[0])[:n]]


def _predict_weights(config: ExperimentConfig):
    n_dom = len(config.train_labels)
    return uniform_weights(n_dom) if config.weights_mode == "uniform" else control_weights(n_dom)


def evaluate_model(config, truth, suite, domains, model, seed, kinds=("id", "ood"), row_sink=None):
    """Score all five methods on the suite's test-split cases for one trained
    model. The evaluation stream is a pure function of ``seed``, so a stored
    model evaluated later reproduces the in-memory run bit for bit."""
    weights = _predict_weights(config)
    mean_model = fit_mean_model(domains)
    pooled = pool_all(domains)
    control = domains[0].points
    rng = RngState(seed).child("eval")
    rows = []
    for case in suite:
        if case.split != "test" or case.kind not in kinds:
            continue
        ref = generate_domain(
            truth, case.label, config.eval_points, rng.child("ref", case.case_id), keep_latents=False
        ).points
        ref_block = pairwise_euclidean(ref, ref)
        predictions = {
            "pdae": predict(
                model,
                domains,
                case.label,
                weights,
                rng.child("pdae", case.case_id),
                size=config.eval_points,
            ),
            "linear_regression": mean_shift_distribution(
                _subsample(control, config.eval_points, rng.child("linreg", case.case_id)),
                predict_mean(mean_model, case.label),
            ),
            "pseudobulk": _subsample(
                pseudobulk(domains, case.label),
                config.eval_points,
                rng.child("pseudobulk", case.case_id),
            ),
            "pool_all": _subsample(
                pooled, config.eval_points, rng.child("pool", case.case_id)
            ),
            "oracle": generate_domain(
                truth,
                case.label,
                config.eval_points,
                rng.child("oracle", case.case_id),
                keep_latents=False,
            ).points,
        }
        for method in METHODS:
            ed, mmd2, mdiff = score_samples(predictions[method], ref, reference_self=ref_block)
            row = EvalRow(
                method=method,
                case_id=case.case_id,
                kind=case.kind,
                arity=case.arity,
                seed=seed,
                energy_distance=ed,
                mmd_squared=mmd2,
                mean_diff=mdiff,
            )
            rows.append(row)
            if row_sink is not None:
                row_sink(row)
    return rows


def run_simulation(
    config: ExperimentConfig,
    keep_artifacts: bool = False,
    row_sink=None,
    kinds=("id", "ood"),
) -> EvalReport:
    """Generate training domains, train the autoencoder, fit the baselines and
    score all five methods on the frozen test-split cases, for every seed.

    ``row_sink`` receives each EvalRow as it is produced, so callers can flush
    partial results even if a later seed fails. ``kinds`` restricts which test
    regions are evaluated (the noise sweep uses ID only).
    """
    suite = make_test_suite(RngState(config.suite_seed).child("suite"))
    truth = truth_model(config)
    rows: list = []
    artifacts: list = []
    for seed in config.seeds:
        root = RngState(seed)
        domains = [
            generate_domain(truth, label, config.n_per_domain, root.child("data", e))
            for e, label in enumerate(config.train_labels)
        ]
        model = init_model(
            root.child("init"),
            x_dim=truth.x_dim,
            latent_dim=config.latent_dim,
            n_elementary=config.n_elementary,
            hidden=config.hidden,
            noise_dim=config.resolved_model_noise_dim,
            noise_std=config.model_noise_std,
            beta=config.beta,
        )
        model, history = train(model, domains, replace(config.train, seed=seed))
        rows.extend(
            evaluate_model(config, truth, suite, domains, model, seed, kinds, row_sink)
        )
        if keep_artifacts:
            artifacts.append(
                SeedArtifacts(seed=seed, truth=truth, domains=domains, model=model, history=history)
            )
    return EvalReport(rows=rows, artifacts=artifacts if keep_artifacts else None)


def sweep_point_config(config: ExperimentConfig, sigma: float) -> ExperimentConfig:
    """One sweep point: regenerate with noise columns at scale sigma; the model
    mirrors the noise dimensionality and draws its own noise at
    max(sigma, 0.1) so the decoder stays stochastic even in the clean limit."""
    return replace(
        config,
        obs_noise_std=float(sigma),
        model_noise_dim=None,
        model_noise_std=max(float(sigma), 0.1),
    )


def run_noise_sweep(
    config: ExperimentConfig,
    noise_levels=SWEEP_NOISE_LEVELS,
    row_sink=None,
) -> list:
    """Re-run the ID evaluation at each noise scale. Returns a list of
    (sigma, EvalReport) pairs in the given order.

    ``row_sink``, when given, is called as ``row_sink(sigma, row)``.
    """
    if config.noise_dims <= 0:
        raise ValueError("noise sweep needs noise_dims > 0 (pure-noise observation columns)")
    out = []
    for sigma in noise_levels:
        if sigma < 0:
            raise ValueError(f"noise levels must be nonnegative, got {sigma}")
        point = sweep_point_config(config, sigma)
        sink = None if row_sink is None else (lambda row, s=sigma: row_sink(s, row))
        out.append((float(sigma), run_simulation(point, kinds=("id",), row_sink=sink)))
    return out
