"""Baselines: pooling rules, the mean regression model, and mean shifting."""

import numpy as np
import pytest

from pdae.baselines import (
    MeanModel,
    fit_mean_model,
    mean_shift_distribution,
    pool_all,
    predict_mean,
    pseudobulk,
)
from pdae.genmodel import Domain, GroundTruthModel, MixingSpec, generate_domain
from pdae.numeric.rng import RngState

E = np.eye(3)


def _dom(label, points):
    return Domain(label=np.asarray(label, float), points=np.asarray(points, float))


def _three_domains():
    rng = RngState(50)
    return [
        _dom(np.zeros(3), rng.child("a").normal((4, 2))),
        _dom(E[0], rng.child("b").normal((5, 2)) + 1.0),
        _dom(E[1], rng.child("c").normal((3, 2)) - 1.0),
    ]


# --------------------------------------------------------------------------
# pooling


def test_pool_all_concatenates_in_order():
    doms = _three_domains()
    pooled = pool_all(doms)
    assert pooled.shape == (12, 2)
    assert np.array_equal(pooled, np.concatenate([d.points for d in doms], axis=0))
    # size-weighted mean: pooling is exactly concatenation, no reweighting
    expected_mean = sum(d.points.sum(axis=0) for d in doms) / 12
    assert np.allclose(pooled.mean(axis=0), expected_mean)


def test_pool_all_single_domain_and_empty():
    d = _dom(np.zeros(3), np.arange(6.0).reshape(3, 2))
    assert np.array_equal(pool_all([d]), d.points)
    with pytest.raises(ValueError, match="nothing to pool"):
        pool_all([])


def test_pseudobulk_combination_picks_involved_singles():
    doms = _three_domains()
    out = pseudobulk(doms, np.array([1.0, 1.0, 0.0]))
    expected = np.concatenate([doms[1].points, doms[2].points], axis=0)
    assert np.array_equal(out, expected)


def test_pseudobulk_zero_label_falls_back_to_pool():
    doms = _three_domains()
    assert np.array_equal(pseudobulk(doms, np.zeros(3)), pool_all(doms))


def test_pseudobulk_dose_and_single_selection():
    doms = _three_domains()
    # dose 2 on the second coordinate still selects the single-e2 domain only
    out = pseudobulk(doms, np.array([0.0, 2.0, 0.0]))
    assert np.array_equal(out, doms[2].points)
    # a coordinate with no matching single domain contributes nothing
    out = pseudobulk(doms, np.array([0.0, 0.0, 1.0]))
    assert np.array_equal(out, pool_all(doms))


def test_pseudobulk_ignores_multi_coordinate_training_domains():
    doms = _three_domains() + [_dom(np.array([1.0, 0.0, 1.0]), np.full((2, 2), 9.0))]
    out = pseudobulk(doms, np.array([1.0, 0.0, 1.0]))
    # only the single-e1 domain is involved; the double-labelled one is not
    assert np.array_equal(out, doms[1].points)


# --------------------------------------------------------------------------
# mean regression


def test_fit_mean_model_two_point_exact():
    # two domains, one active coordinate: intercept and slope are determined
    doms = [
        _dom(np.zeros(3), np.tile([1.0, 2.0], (4, 1))),
        _dom(E[0], np.tile([3.0, 2.5], (4, 1))),
    ]
    m = fit_mean_model(doms)
    assert np.allclose(m.intercept, [1.0, 2.0], atol=1e-12)
    assert np.allclose(m.coef[:, 0], [2.0, 0.5], atol=1e-12)
    assert np.allclose(predict_mean(m, E[0]), [3.0, 2.5], atol=1e-12)


def test_fit_mean_model_duplicate_labels_average():
    doms = [
        _dom(np.zeros(3), np.tile([0.0, 0.0], (4, 1))),
        _dom(E[0], np.tile([2.0, 0.0], (4, 1))),
        _dom(E[0], np.tile([4.0, 0.0], (4, 1))),
    ]
    m = fit_mean_model(doms)
    # least squares lands on the average of the duplicated condition
    assert np.allclose(predict_mean(m, E[0]), [3.0, 0.0], atol=1e-12)


def test_fit_mean_model_recovers_linear_world():
    # identity mixing with sigma -> 0: domain means are exactly intercept + W a
    truth = GroundTruthModel(
        shift_matrix=np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]),
        base_mean=np.array([0.5, -0.5]),
        base_std=1e-9,
        mixing=MixingSpec.identity(),
    )
    labels = [np.zeros(3), E[0], E[1], E[2]]
    doms = [generate_domain(truth, a, 64, RngState(51).child("d", i)) for i, a in enumerate(labels)]
    m = fit_mean_model(doms)
    assert np.max(np.abs(m.coef - truth.shift_matrix)) < 1e-8
    assert np.max(np.abs(m.intercept - truth.base_mean)) < 1e-8


def test_fit_mean_model_rank_deficient_consistent_at_training_labels():
    # two domains cannot pin three columns; the minimum-norm fit must still
    # reproduce the observed training means exactly (the system is consistent)
    doms = [
        _dom(np.zeros(3), np.tile([1.0, 1.0], (4, 1))),
        _dom(E[0], np.tile([2.0, 3.0], (4, 1))),
    ]
    m = fit_mean_model(doms)
    assert np.allclose(predict_mean(m, np.zeros(3)), [1.0, 1.0], atol=1e-10)
    assert np.allclose(predict_mean(m, E[0]), [2.0, 3.0], atol=1e-10)


def test_fit_mean_model_needs_two_domains():
    with pytest.raises(ValueError, match=">= 2 domains"):
        fit_mean_model([_dom(np.zeros(3), np.zeros((3, 2)))])


def test_mean_model_rejects_nonfinite():
    with pytest.raises(ValueError, match="non-finite"):
        MeanModel(intercept=np.array([np.nan, 0.0]), coef=np.zeros((2, 3)))


def test_predict_mean_is_affine():
    m = MeanModel(intercept=np.array([1.0, -1.0]), coef=np.array([[2.0, 0.0, 1.0], [0.0, 3.0, 1.0]]))
    a = np.array([1.0, 2.0, 0.5])
    assert np.allclose(predict_mean(m, a), m.intercept + m.coef @ a, atol=1e-15)
    z = predict_mean(m, np.zeros(3))
    assert np.allclose(z, m.intercept)


# --------------------------------------------------------------------------
# mean-shifted reference distribution


def test_mean_shift_noop_at_reference_mean():
    ref = RngState(52).normal((40, 2)) * 2.0
    out = mean_shift_distribution(ref, ref.mean(axis=0))
    assert np.max(np.abs(out - ref)) < 1e-12


def test_mean_shift_hits_target_and_keeps_shape():
    rng = RngState(53)
    ref = rng.normal((200, 3)) @ np.diag([1.0, 2.0, 0.5]) + rng.normal((200, 3)) ** 2
    target = np.array([5.0, -1.0, 0.25])
    out = mean_shift_distribution(ref, target)
    assert np.max(np.abs(out.mean(axis=0) - target)) < 1e-12
    centered_ref = ref - ref.mean(axis=0)
    centered_out = out - out.mean(axis=0)
    assert np.allclose(np.cov(centered_out.T), np.cov(centered_ref.T), atol=1e-12)
    # third central moment: translation must not touch asymmetry either
    assert np.allclose((centered_out**3).mean(axis=0), (centered_ref**3).mean(axis=0), atol=1e-12)


def test_mean_shift_rejects_dim_mismatch():
    with pytest.raises(ValueError, match="incompatible"):
        mean_shift_distribution(np.zeros((4, 2)), np.zeros(3))
