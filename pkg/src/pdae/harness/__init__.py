"""Experiment orchestration: label suites, benchmark runs, theory checks."""

from .experiments import (
    METHODS,
    SWEEP_NOISE_LEVELS,
    AggregateRow,
    EvalReport,
    EvalRow,
    ExperimentConfig,
    SeedArtifacts,
    canonical_shift_matrix,
    canonical_train_labels,
    evaluate_model,
    run_noise_sweep,
    run_simulation,
    score_samples,
    sweep_point_config,
    truth_model,
)
from .labels import (
    N_ELEMENTARY,
    TestCase,
    label_in_region,
    make_test_suite,
    sample_test_label,
    shift_in_region,
)
from .theory import (
    ExtrapolationReport,
    IdentifiabilityReport,
    ReparametrizationReport,
    SemEquivalenceReport,
    TheoryScenario,
    default_extrapolation_scenario,
    permutation_energy_test,
    random_orthogonal,
    random_spd_matrix,
    random_stable_adjacency,
    sem_trial_suite,
    verify_extrapolation_linear,
    verify_identifiability,
    verify_reparametrization,
    verify_sem_equivalence,
)

__all__ = [
    "METHODS",
    "SWEEP_NOISE_LEVELS",
    "AggregateRow",
    "EvalReport",
    "EvalRow",
    "ExperimentConfig",
    "ExtrapolationReport",
    "IdentifiabilityReport",
    "N_ELEMENTARY",
    "ReparametrizationReport",
    "SeedArtifacts",
    "SemEquivalenceReport",
    "TestCase",
    "TheoryScenario",
    "canonical_shift_matrix",
    "canonical_train_labels",
    "default_extrapolation_scenario",
    "evaluate_model",
    "label_in_region",
    "make_test_suite",
    "permutation_energy_test",
    "random_orthogonal",
    "random_spd_matrix",
    "random_stable_adjacency",
    "run_noise_sweep",
    "run_simulation",
    "sample_test_label",
    "score_samples",
    "sem_trial_suite",
    "shift_in_region",
    "sweep_point_config",
    "truth_model",
    "verify_extrapolation_linear",
    "verify_identifiability",
    "verify_reparametrization",
    "verify_sem_equivalence",
]
