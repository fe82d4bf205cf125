"""Structural checks: extrapolation, SEM equivalence, reparametrization,
identifiability of encoders."""

import numpy as np
import pytest

from helpers import identity_mlp, identity_world_model
from pdae.autoencoder import PdaeModel
from pdae.genmodel import GroundTruthModel, MixingSpec, generate_domain
from pdae.harness.experiments import canonical_shift_matrix, canonical_train_labels
from pdae.harness.theory import (
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
from pdae.numeric.mlp import MlpParams
from pdae.numeric.rng import RngState

W = canonical_shift_matrix()


# --------------------------------------------------------------------------
# random building blocks


def test_random_orthogonal_properties():
    for dim in (2, 3, 5):
        o = random_orthogonal(RngState(70).child("o", dim), dim)
        assert np.max(np.abs(o.T @ o - np.eye(dim))) < 1e-12
        assert abs(abs(np.linalg.det(o)) - 1.0) < 1e-12
    a = random_orthogonal(RngState(71), 3)
    b = random_orthogonal(RngState(71), 3)
    assert np.array_equal(a, b)


def test_random_spd_matrix_is_spd():
    for t in range(5):
        s = random_spd_matrix(RngState(72).child(t), 3)
        assert np.max(np.abs(s - s.T)) < 1e-12
        assert np.min(np.linalg.eigvalsh(s)) > 0


def test_random_stable_adjacency_hits_exact_radius():
    for t in range(5):
        b = random_stable_adjacency(RngState(73).child(t), dim=4, radius=0.6)
        rho = max(abs(np.linalg.eigvals(b)))
        assert abs(rho - 0.6) < 1e-12
    with pytest.raises(ValueError, match="radius"):
        random_stable_adjacency(RngState(0), radius=1.0)


def test_scenario_validation():
    with pytest.raises(ValueError, match="not orthogonal"):
        TheoryScenario(
            shift_matrix=W,
            rel_labels=np.eye(3)[:, :2],
            orthogonal_map=np.array([[1.0, 0.5], [0.0, 1.0]]),
            mixing=MixingSpec.identity(),
            base_label=np.zeros(3),
        )
    with pytest.raises(ValueError, match="rel_labels"):
        TheoryScenario(
            shift_matrix=W,
            rel_labels=np.eye(2),
            orthogonal_map=np.eye(2),
            mixing=MixingSpec.identity(),
            base_label=np.zeros(3),
        )


# --------------------------------------------------------------------------
# linear extrapolation of the rotated twin


def test_extrapolation_default_scenario_passes():
    rep = verify_extrapolation_linear(
        default_extrapolation_scenario(RngState(74).child("scen")), RngState(74).child("run")
    )
    assert rep.passed and not rep.rejected
    assert rep.mean_err < 1e-8 and rep.cov_err < 1e-8
    assert rep.out_of_span_gap is not None and rep.out_of_span_gap > 1e-6
    assert rep.n_cases == 10


def test_extrapolation_rejects_rank_deficient_designs():
    scen = TheoryScenario(
        shift_matrix=W,
        rel_labels=np.array([[1.0], [0.0], [0.0]]),  # one training shift in 2-D latents
        orthogonal_map=random_orthogonal(RngState(75), 2),
        mixing=MixingSpec.identity(),
        base_label=np.zeros(3),
    )
    rep = verify_extrapolation_linear(scen, RngState(76))
    assert rep.rejected and not rep.passed
    assert "rank" in rep.reason


def test_extrapolation_full_span_has_no_gap_control():
    # all three relative shifts observed: nothing is left out of span
    scen = TheoryScenario(
        shift_matrix=W,
        rel_labels=np.eye(3),
        orthogonal_map=random_orthogonal(RngState(77), 2),
        mixing=MixingSpec.affine(RngState(78).normal((4, 2)), RngState(79).normal(4)),
        base_label=np.zeros(3),
    )
    rep = verify_extrapolation_linear(scen, RngState(80))
    assert rep.passed
    assert rep.out_of_span_gap is None


# --------------------------------------------------------------------------
# permutation two-sample test


def test_permutation_test_accepts_identical_distributions():
    rng = RngState(81)
    x = rng.child("x").normal((200, 3))
    y = rng.child("y").normal((200, 3))
    stat, q, ok = permutation_energy_test(x, y, rng.child("perm"))
    assert ok and stat < q
    assert ok == (stat < q)


def test_permutation_test_rejects_separated_samples():
    rng = RngState(82)
    x = rng.child("x").normal((200, 3))
    y = rng.child("y").normal((200, 3)) + 3.0
    stat, q, ok = permutation_energy_test(x, y, rng.child("perm"))
    assert not ok and stat > q
    assert stat > 1.0  # the shift dominates the null scale


# --------------------------------------------------------------------------
# SEM equivalence


def test_sem_equivalence_trivial_graph():
    # empty graph: both routes draw noise + shift through the identity.
    # Frozen seed with a wide margin (statistic ~6x under the null quantile).
    rep = verify_sem_equivalence(np.zeros((2, 2)), np.array([1.0, -1.0]), 512, RngState(86))
    assert rep.passed


def test_sem_negative_control_rejects_transposed_matrix():
    chain = np.array([[0.0, 0.8], [0.0, 0.0]])
    rep = verify_sem_equivalence(
        chain, np.array([3.0, 0.0]), 512, RngState(84), wrong_shift_matrix=True
    )
    assert not rep.passed
    assert rep.statistic > rep.null_quantile


def test_sem_trial_suite_frozen_seed():
    # mirrors the structural-check command's fixture: a seeded batch of trials
    # whose pass count was verified to be stable at this seed
    reports = sem_trial_suite(RngState(4).child("sem"), n_trials=20)
    assert sum(r.passed for r in reports) >= 19
    neg = sem_trial_suite(RngState(4).child("sem-negative"), n_trials=1, wrong_shift_matrix=True)[0]
    assert not neg.passed


# --------------------------------------------------------------------------
# reparametrization to a standard-normal base


def test_reparametrization_standard_base_is_exact():
    rep = verify_reparametrization(
        mixing=MixingSpec.identity(),
        shift_matrix=W,
        base_mean=np.zeros(2),
        base_cov=np.eye(2),
        labels=canonical_train_labels(),
        rng=RngState(85),
    )
    assert rep.passed
    assert rep.moment_err < 1e-12
    assert rep.rank_original == rep.rank_transformed == 2
    assert len(rep.per_label) == 4 and all(ok for _, _, ok in rep.per_label)


def test_reparametrization_random_spd_scenario():
    rng = RngState(86)
    rep = verify_reparametrization(
        mixing=MixingSpec.affine(rng.child("mix").normal((3, 2)), rng.child("off").normal(3)),
        shift_matrix=W,
        base_mean=rng.child("mu").normal(2),
        base_cov=random_spd_matrix(rng.child("cov"), 2),
        labels=canonical_train_labels(),
        rng=rng.child("run"),
    )
    assert rep.passed
    assert rep.moment_err < 1e-8


def test_reparametrization_rejects_non_pd_covariance():
    with pytest.raises(ValueError, match="positive definite"):
        verify_reparametrization(
            mixing=MixingSpec.identity(),
            shift_matrix=W,
            base_mean=np.zeros(2),
            base_cov=np.array([[1.0, 2.0], [2.0, 1.0]]),  # eigenvalues -1 and 3
            labels=canonical_train_labels(),
            rng=RngState(0),
        )


# --------------------------------------------------------------------------
# identifiability of encoders


def _identity_truth():
    return GroundTruthModel(
        shift_matrix=W,
        base_mean=np.zeros(2),
        base_std=0.25,
        mixing=MixingSpec.identity(),
    )


def _latent_domains(truth, rng, n=128):
    return [
        generate_domain(truth, a, n, rng.child("d", i))
        for i, a in enumerate(canonical_train_labels())
    ]


def test_identifiability_oracle_encoder_is_perfect():
    truth = _identity_truth()
    domains = _latent_domains(truth, RngState(87))
    rep = verify_identifiability(identity_world_model(W), truth, domains)
    assert np.all(rep.r_squared > 1.0 - 1e-12)
    assert rep.residual_rms < 1e-10
    assert rep.shift_err < 1e-10
    assert np.max(np.abs(rep.linear_map - np.eye(2))) < 1e-10


def test_identifiability_orthogonal_encoder_still_perfect():
    truth = _identity_truth()
    domains = _latent_domains(truth, RngState(88))
    o = random_orthogonal(RngState(89), 2)
    # encode(x) = x @ o.T rotates every latent by o; the learned shifts must be
    # rotated the same way for the shift comparison to agree
    model = PdaeModel(
        encoder=MlpParams([o.T.copy()], [np.zeros(2)]),
        decoder=identity_mlp(2),
        shift_matrix=o @ W,
        noise_dim=0,
        noise_std=0.0,
    )
    rep = verify_identifiability(model, truth, domains)
    assert np.all(rep.r_squared > 1.0 - 1e-12)
    assert rep.shift_err < 1e-8
    assert np.max(np.abs(rep.linear_map - o)) < 1e-8


def test_identifiability_random_encoder_reported_not_asserted():
    truth = _identity_truth()
    domains = _latent_domains(truth, RngState(90))
    rough = PdaeModel(
        encoder=MlpParams(
            [RngState(91).normal((2, 8)), RngState(92).normal((8, 2))],
            [np.zeros(8), np.zeros(2)],
        ),
        decoder=identity_mlp(2),
        shift_matrix=np.zeros((2, 3)),
        noise_dim=0,
        noise_std=0.0,
    )
    rep = verify_identifiability(rough, truth, domains)
    assert np.all(np.isfinite(rep.r_squared))
    assert np.all(rep.r_squared <= 1.0 + 1e-12)


def test_identifiability_requires_retained_latents():
    truth = _identity_truth()
    domains = _latent_domains(truth, RngState(93))
    stripped = [
        generate_domain(truth, d.label, 16, RngState(94).child(i), keep_latents=False)
        for i, d in enumerate(domains)
    ]
    with pytest.raises(ValueError, match="latents"):
        verify_identifiability(identity_world_model(W), truth, stripped)
