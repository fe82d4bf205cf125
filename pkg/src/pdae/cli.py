"""Batch command-line interface.

Every command is a pure function of (inputs, config, seed): rerunning with the
same arguments reproduces the same output bytes (manifests carry a timestamp
and are the one exception). Exit codes: 0 success, 1 usage/config error,
2 verification failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .autoencoder import control_weights, init_model, predict, train, uniform_weights
from .genmodel import MixingSpec, generate_domain
from .harness.experiments import (
    EvalReport,
    canonical_shift_matrix,
    canonical_train_labels,
    evaluate_model,
    run_noise_sweep,
    run_simulation,
    truth_model,
)
from .harness.labels import make_test_suite
from .harness.theory import (
    TheoryScenario,
    default_extrapolation_scenario,
    random_orthogonal,
    random_spd_matrix,
    sem_trial_suite,
    verify_extrapolation_linear,
    verify_reparametrization,
)
from .numeric.rng import RngState
from .serialize import (
    AGGREGATE_HEADER,
    ConfigError,
    RowWriter,
    VerificationFailure,
    aggregate_row_cells,
    build_experiment,
    config_digest,
    load_checkpoint,
    load_config,
    load_domains,
    save_checkpoint,
    save_domains,
    sweep_levels,
    write_csv,
    write_manifest,
)


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit code 2 by default; this tool
    reserves 2 for verification failures, so remap usage errors to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(sub, name, help_text, func, *, config=False, seed=None, out=False,
                data=False, checkpoint=False, scale=False):
    p = sub.add_parser(name, help=help_text, description=help_text)
    if config:
        p.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    if seed is not None:
        p.add_argument("--seed", type=int, default=seed,
                       help=f"run seed (default {seed})")
    if out:
        p.add_argument("--out", required=True, help="output directory")
    if data:
        p.add_argument("--data", required=True, help="directory holding domain CSVs + labels.json")
    if checkpoint:
        p.add_argument("--checkpoint", required=True, help="model checkpoint JSON")
    if scale:
        p.add_argument("--scale", choices=("desk", "paper"), default="desk",
                       help="preset defaults the config overrides (default desk)")
    p.set_defaults(func=func)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdae", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pdae {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    _add_common(sub, "generate", "Sample the training domains to CSV files.",
                cmd_generate, config=True, seed=0, out=True, scale=True)
    _add_common(sub, "train", "Train the autoencoder on a generated dataset.",
                cmd_train, config=True, seed=0, out=True, data=True, scale=True)
    p = _add_common(sub, "predict", "Sample the predicted distribution for a label.",
                    cmd_predict, seed=0, out=True, data=True, checkpoint=True)
    p.add_argument("--label", required=True, help="comma-separated perturbation label, e.g. 0.5,0,1")
    p.add_argument("--weights", default="uniform",
                   help="'uniform', 'control', or comma-separated domain weights summing to 1")
    p.add_argument("--size", type=int, default=None, help="number of output samples")
    _add_common(sub, "evaluate", "Score a trained model against fresh ground-truth draws.",
                cmd_evaluate, config=True, seed=0, out=True, data=True, checkpoint=True, scale=True)
    p = _add_common(sub, "benchmark", "Full run: generate, train and evaluate every method and seed.",
                    cmd_benchmark, config=True, out=True, scale=True)
    p.add_argument("--seed", type=int, default=None, help="restrict to a single seed")
    _add_common(sub, "sweep-noise", "Robustness sweep over appended-noise scales.",
                cmd_sweep_noise, config=True, out=True, scale=True)
    p = _add_common(sub, "verify-theory", "Run the structural-guarantee verification suite.",
                    cmd_verify_theory, seed=4)
    p.add_argument("--out", help="optional output directory for the report CSV")
    return parser


# --------------------------------------------------------------------------
# helpers


def _load(args, seed=None):
    raw = load_config(args.config) if getattr(args, "config", None) else {}
    scale = getattr(args, "scale", "desk")
    return raw, build_experiment(raw, scale=scale, seed=seed)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_label(text: str, n_elementary: int) -> np.ndarray:
    try:
        label = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise ConfigError(f"label {text!r} is not a comma-separated number list") from None
    if label.size != n_elementary:
        raise ConfigError(f"label has {label.size} entries, model expects {n_elementary}")
    return label


def _parse_weights(text: str, n_domains: int) -> np.ndarray:
    if text == "uniform":
        return uniform_weights(n_domains)
    if text == "control":
        return control_weights(n_domains)
    try:
        w = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise ConfigError(
            f"weights {text!r} must be 'uniform', 'control' or a comma-separated list"
        ) from None
    if w.size != n_domains:
        raise ConfigError(f"{w.size} weights for {n_domains} source domains")
    if np.any(w < 0):
        raise ConfigError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ConfigError(f"weights sum to {w.sum():.12g}, expected 1 (tolerance 1e-9)")
    return w


def _check_data_matches(config, domains):
    labels = [d.label for d in domains]
    if len(labels) != len(config.train_labels) or any(
        a.shape != b.shape or not np.array_equal(a, b)
        for a, b in zip(labels, config.train_labels)
    ):
        raise ConfigError("dataset labels disagree with the config's training labels")


# --------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    raw, config = _load(args)
    truth = truth_model(config)
    root = RngState(args.seed)
    domains = [
        generate_domain(truth, label, config.n_per_domain, root.child("data", e))
        for e, label in enumerate(config.train_labels)
    ]
    out = _outdir(args)
    files = save_domains(out, domains)
    files.append(write_manifest(out, "generate", config_digest(raw), args.seed, files))
    print(f"wrote {len(files)} files to {out}")
    return 0


def cmd_train(args) -> int:
    raw, config = _load(args)
    domains = load_domains(args.data)
    _check_data_matches(config, domains)
    x_dim = domains[0].points.shape[1]
    root = RngState(args.seed)
    model = init_model(
        root.child("init"),
        x_dim=x_dim,
        latent_dim=config.latent_dim,
        n_elementary=config.n_elementary,
        hidden=config.hidden,
        noise_dim=config.resolved_model_noise_dim,
        noise_std=config.model_noise_std,
        beta=config.beta,
    )
    model, history = train(model, domains, replace(config.train, seed=args.seed))
    out = _outdir(args)
    save_checkpoint(out / "checkpoint.json", model, history)
    write_manifest(out, "train", config_digest(raw), args.seed, ["checkpoint.json"])
    final = history["pert"][-1] if history["pert"] else float("nan")
    print(f"trained {config.train.epochs} epochs; final distributional loss {final:.6f}")
    return 0


def cmd_predict(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    domains = load_domains(args.data)
    if domains[0].points.shape[1] != model.x_dim:
        raise ConfigError(
            f"checkpoint expects {model.x_dim} observation columns, data has "
            f"{domains[0].points.shape[1]}"
        )
    label = _parse_label(args.label, model.n_elementary)
    weights = _parse_weights(args.weights, len(domains))
    rng = RngState(args.seed).child("predict")
    samples = predict(model, domains, label, weights, rng, size=args.size)
    out = _outdir(args)
    name = "samples.csv"
    write_csv(out / name, [f"x{j + 1}" for j in range(samples.shape[1])], samples)
    write_manifest(out, "predict", "-", args.seed, [name])
    print(f"wrote {samples.shape[0]} samples to {out / name}")
    return 0


def cmd_evaluate(args) -> int:
    raw, config = _load(args)
    model, _ = load_checkpoint(args.checkpoint)
    domains = load_domains(args.data)
    _check_data_matches(config, domains)
    truth = truth_model(config)
    if truth.x_dim != model.x_dim or domains[0].points.shape[1] != model.x_dim:
        raise ConfigError(
            f"dimension mismatch: config implies {truth.x_dim} observation columns, "
            f"checkpoint has {model.x_dim}, data has {domains[0].points.shape[1]}"
        )
    suite = make_test_suite(RngState(config.suite_seed).child("suite"))
    out = _outdir(args)
    with RowWriter(out / "report_rows.csv") as sink:
        rows = evaluate_model(config, truth, suite, domains, model, args.seed, row_sink=sink)
    report = EvalReport(rows=rows)
    write_csv(out / "report_aggregate.csv", AGGREGATE_HEADER,
              (aggregate_row_cells(a) for a in report.aggregate()))
    files = ["report_rows.csv", "report_aggregate.csv"]
    write_manifest(out, "evaluate", config_digest(raw), args.seed, files)
    _print_aggregate(report)
    return 0


def cmd_benchmark(args) -> int:
    raw, config = _load(args, seed=args.seed)
    out = _outdir(args)
    with RowWriter(out / "report_rows.csv") as sink:
        report = run_simulation(config, row_sink=sink)
    write_csv(out / "report_aggregate.csv", AGGREGATE_HEADER,
              (aggregate_row_cells(a) for a in report.aggregate()))
    files = ["report_rows.csv", "report_aggregate.csv"]
    write_manifest(out, "benchmark", config_digest(raw), list(config.seeds), files)
    _print_aggregate(report)
    return 0


def _sigma_name(sigma: float) -> str:
    return f"sweep_rows_{sigma:g}.csv"


def cmd_sweep_noise(args) -> int:
    raw, config = _load(args)
    if "noise_dims" not in raw:
        config = replace(config, noise_dims=8)
    levels = sweep_levels(raw)
    out = _outdir(args)
    writers: dict = {}

    def sink(sigma, row):
        if sigma not in writers:
            writers[sigma] = RowWriter(out / _sigma_name(sigma))
        writers[sigma](row)

    try:
        results = run_noise_sweep(config, levels, row_sink=sink)
    finally:
        for w in writers.values():
            w.close()
    agg_rows = []
    for sigma, report in results:
        for a in report.aggregate():
            agg_rows.append([sigma, *aggregate_row_cells(a)])
    write_csv(out / "sweep_aggregate.csv", ["sigma", *AGGREGATE_HEADER], agg_rows)
    files = [_sigma_name(s) for s, _ in results] + ["sweep_aggregate.csv"]
    write_manifest(out, "sweep-noise", config_digest(raw), list(config.seeds), files)
    for sigma, report in results:
        ed = report.mean_metric("pdae", "id")
        lr = report.mean_metric("linear_regression", "id")
        print(f"sigma={sigma:g}: autoencoder ID ED {ed:.4f}, linear regression {lr:.4f}")
    return 0


def _print_aggregate(report: EvalReport) -> None:
    for a in report.aggregate():
        print(
            f"{a.method:18s} {a.kind:4s} "
            f"ED {a.energy_distance_mean:.4f}±{a.energy_distance_std:.4f}  "
            f"MMD2 {a.mmd_squared_mean:.4f}±{a.mmd_squared_std:.4f}  "
            f"mean-diff {a.mean_diff_mean:.4f}±{a.mean_diff_std:.4f}"
        )


# --------------------------------------------------------------------------
# theory verification


def _rank_deficient_scenario(rng: RngState) -> TheoryScenario:
    return TheoryScenario(
        shift_matrix=canonical_shift_matrix(),
        rel_labels=np.array([[1.0], [0.0], [0.0]]),  # a single training shift
        orthogonal_map=random_orthogonal(rng, 2),
        mixing=MixingSpec.identity(),
        base_label=np.zeros(3),
    )


def run_theory_suite(seed: int = 4):
    """All structural checks; returns (overall_pass, list of result lines).

    Each line is (name, passed, details)."""
    rng = RngState(seed)
    lines = []

    rep = verify_extrapolation_linear(
        default_extrapolation_scenario(rng.child("extrap-scenario")),
        rng.child("extrap"),
        n_cases=10,
    )
    gap = "none" if rep.out_of_span_gap is None else f"{rep.out_of_span_gap:.3e}"
    lines.append((
        "extrapolation-in-span",
        rep.passed,
        f"mean_err={rep.mean_err:.3e} cov_err={rep.cov_err:.3e} out_of_span_gap={gap}",
    ))

    rej = verify_extrapolation_linear(
        _rank_deficient_scenario(rng.child("extrap-rank")), rng.child("extrap-rank-run")
    )
    lines.append((
        "extrapolation-rank-rejection",
        rej.rejected,
        rej.reason if rej.rejected else "rank-deficient scenario was not rejected",
    ))

    trials = sem_trial_suite(rng.child("sem"), n_trials=20)
    n_pass = sum(t.passed for t in trials)
    lines.append((
        "sem-equivalence",
        n_pass >= 19,
        f"{n_pass}/20 permutation tests passed",
    ))

    neg = sem_trial_suite(rng.child("sem-negative"), n_trials=1, wrong_shift_matrix=True)[0]
    lines.append((
        "sem-negative-control",
        not neg.passed,
        f"statistic {neg.statistic:.4f} vs null q95 {neg.null_quantile:.4f} "
        f"({'rejected as expected' if not neg.passed else 'failed to reject'})",
    ))

    labels = canonical_train_labels()
    for i in range(5):
        sub = rng.child("reparam", i)
        rep = verify_reparametrization(
            mixing=MixingSpec.affine(sub.child("mix").normal((3, 2)), sub.child("mix-off").normal(3)),
            shift_matrix=canonical_shift_matrix(),
            base_mean=sub.child("mu").normal(2),
            base_cov=random_spd_matrix(sub.child("cov"), 2),
            labels=labels,
            rng=sub.child("run"),
        )
        lines.append((
            f"reparametrization-{i}",
            rep.passed,
            f"moment_err={rep.moment_err:.3e} rank {rep.rank_original}->{rep.rank_transformed}, "
            f"{sum(ok for _, _, ok in rep.per_label)}/{len(rep.per_label)} label tests passed",
        ))

    overall = all(ok for _, ok, _ in lines)
    return overall, lines


def cmd_verify_theory(args) -> int:
    overall, lines = run_theory_suite(args.seed)
    for name, ok, details in lines:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {details}")
    if args.out:
        out = _outdir(args)
        write_csv(
            out / "theory_report.csv",
            ["check", "passed", "details"],
            [[name, str(ok), details] for name, ok, details in lines],
        )
        write_manifest(out, "verify-theory", "-", args.seed, ["theory_report.csv"])
    if not overall:
        raise VerificationFailure("one or more structural checks failed")
    return 0


# --------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except VerificationFailure as e:
        print(f"verification failed: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
