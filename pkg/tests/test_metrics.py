"""Tests for scoring rules and two-sample distances.

The small-support cases are enumerated by hand; identities are checked at the
estimator level (both sides V-statistics), not just asymptotically.
"""

import numpy as np
import pytest

from pdae.metrics import (
    KernelSpec,
    crps,
    distance_kernel,
    energy_distance,
    energy_score,
    mean_difference,
    median_heuristic,
    mmd_squared,
)
from pdae.numeric.rng import RngState


# ---------------------------------------------------------------------------
# energy score / crps


def test_energy_score_point_mass():
    for beta in (0.5, 1.0, 1.5):
        got = energy_score(np.array([[1.0, 2.0]]), [4.0, 6.0], beta=beta)
        assert got == pytest.approx(-(5.0**beta), abs=1e-12)


def test_energy_score_two_point_enumeration():
    # P = {0, 2}, x = 1, beta = 1:
    # within = (1/(2 m^2)) * sum_{ij} |p_i - p_j| = (0+2+2+0)/8 = 0.5
    # cross  = mean_i |p_i - 1| = 1
    # score  = 0.5 - 1 = -0.5
    got = energy_score(np.array([0.0, 2.0]), [1.0], beta=1.0)
    assert got == pytest.approx(-0.5, abs=1e-15)


def test_energy_score_validation():
    with pytest.raises(ValueError):
        energy_score(np.zeros((0, 1)), [0.0])
    with pytest.raises(ValueError):
        energy_score(np.array([0.0, 1.0]), [0.0], beta=2.0)  # open interval
    with pytest.raises(ValueError):
        energy_score(np.zeros((3, 2)), [0.0])  # dimension mismatch


def test_crps_matches_two_point_enumeration():
    assert crps(np.array([0.0, 2.0]), 1.0) == pytest.approx(-0.5, abs=1e-15)


def test_crps_point_mass():
    assert crps(np.array([3.0]), 1.0) == pytest.approx(-2.0, abs=1e-15)


def test_crps_equals_energy_score_beta1_in_1d():
    rng = RngState(1)
    sample = rng.normal((40, 1))
    for x in (-0.7, 0.0, 2.3):
        assert crps(sample, x) == pytest.approx(
            energy_score(sample, [x], beta=1.0), abs=1e-12
        )


def test_crps_rejects_multivariate():
    with pytest.raises(ValueError, match="1-D"):
        crps(np.zeros((3, 2)), 0.0)


def test_energy_score_strict_propriety_monte_carlo():
    # mean score of N(0,1) observations under the true sample must beat the
    # score under an N(1,1) candidate, trial by trial
    wins = 0
    m = 2048
    for trial in range(20):
        rng = RngState(300 + trial)
        truth = rng.child("p").normal((m, 1))
        shifted = truth + 1.0
        obs = rng.child("x").normal((m, 1))
        # mean_i ES(P, x_i) = within(P) - mean_ij ||P_j - x_i||, computed blockwise
        def mean_score(sample):
            within = np.abs(sample - sample.T).sum() / (2.0 * m * m)
            cross = np.abs(sample - obs.T).mean()
            return within - cross

        if mean_score(truth) > mean_score(shifted):
            wins += 1
    assert wins >= 19, f"true sample won only {wins}/20 trials"


# ---------------------------------------------------------------------------
# energy distance


def test_energy_distance_identical_degenerate():
    x = np.array([[1.0, 1.0]])
    assert energy_distance(x, x) == 0.0


def test_energy_distance_two_singletons():
    got = energy_distance(np.array([0.0]), np.array([2.0]), beta=1.0)
    assert got == pytest.approx(4.0, abs=1e-15)


def test_energy_distance_self_is_zero():
    x = RngState(3).normal((60, 3))
    assert abs(energy_distance(x, x)) < 1e-12


def test_energy_distance_beta2_is_twice_squared_mean_gap():
    rng = RngState(4)
    for _ in range(5):
        x = rng.normal((33, 2)) + rng.normal(2)
        y = rng.normal((47, 2))
        want = 2.0 * np.linalg.norm(x.mean(axis=0) - y.mean(axis=0)) ** 2
        assert energy_distance(x, y, beta=2.0) == pytest.approx(want, abs=1e-10)


def test_energy_distance_nonnegative():
    rng = RngState(5)
    for _ in range(10):
        x = rng.normal((20, 2))
        y = rng.normal((25, 2)) * rng.uniform(0.2, 3.0)
        assert energy_distance(x, y) >= -1e-12


def test_energy_distance_permutation_invariance():
    rng = RngState(6)
    x = rng.normal((30, 2))
    y = rng.normal((20, 2))
    base = energy_distance(x, y)
    shuffled = energy_distance(x[rng.permutation(30)], y[rng.permutation(20)])
    assert abs(base - shuffled) < 1e-12


# ---------------------------------------------------------------------------
# MMD


def test_mmd_identical_sets_zero():
    x = RngState(7).normal((25, 3))
    assert abs(mmd_squared(x, x, KernelSpec.gaussian(1.3))) < 1e-12
    assert abs(mmd_squared(x, x, KernelSpec.distance(1.0))) < 1e-12


def test_energy_distance_is_twice_distance_kernel_mmd():
    rng = RngState(8)
    for trial in range(20):
        beta = (0.5, 1.0, 1.5)[trial % 3]
        x = rng.normal((15 + trial, 2)) * rng.uniform(0.5, 2.0)
        y = rng.normal((12, 2)) + rng.normal(2)
        ed = energy_distance(x, y, beta=beta)
        md = mmd_squared(x, y, KernelSpec.distance(beta))
        assert abs(ed - 2.0 * md) < 1e-10, f"trial {trial}: {ed} vs 2*{md}"


def test_mmd_gaussian_singletons_closed_form():
    x = np.zeros((1, 2))
    y = np.array([[3.0, 4.0]])
    for bw in (0.5, 2.0):
        want = 2.0 - 2.0 * np.exp(-25.0 / (2.0 * bw * bw))
        assert mmd_squared(x, y, KernelSpec.gaussian(bw)) == pytest.approx(want, abs=1e-12)


def test_distance_kernel_pointwise():
    assert distance_kernel([3.0, 4.0], [3.0, 4.0], 1.0) == pytest.approx(5.0, abs=1e-12)
    assert distance_kernel([0.0, 0.0], [2.0, 1.0], 1.5) == pytest.approx(0.0, abs=1e-12)
    a, b = [1.0, -2.0], [0.5, 3.0]
    assert distance_kernel(a, b, 0.7) == pytest.approx(distance_kernel(b, a, 0.7), abs=1e-15)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec.gaussian(0.0)
    with pytest.raises(ValueError):
        KernelSpec.distance(2.0)  # open at 2 for the kernel form
    with pytest.raises(ValueError):
        KernelSpec("rbf", bandwidth=1.0)


# ---------------------------------------------------------------------------
# median heuristic


def test_median_heuristic_three_points():
    # pooled {0, 1, 2}: pairwise distances {1, 1, 2} -> median 1
    got = median_heuristic(np.array([0.0, 1.0]), np.array([2.0]))
    assert got == 1.0


def test_median_heuristic_identical_points_fallback():
    assert median_heuristic(np.zeros((3, 2)), np.zeros((2, 2))) == 1.0


def test_median_heuristic_majority_zero_falls_back_to_smallest_positive():
    # four coincident points and one at 5: median distance is 0, smallest
    # positive is 5
    x = np.zeros((4, 1))
    y = np.array([[5.0]])
    assert median_heuristic(x, y) == 5.0


def test_median_heuristic_homogeneous_scaling():
    rng = RngState(9)
    x = rng.normal((10, 2))
    y = rng.normal((8, 2))
    base = median_heuristic(x, y)
    assert median_heuristic(3.0 * x, 3.0 * y) == pytest.approx(3.0 * base, rel=1e-12)


def test_median_heuristic_needs_two_points():
    with pytest.raises(ValueError):
        median_heuristic(np.zeros((1, 1)), np.zeros((0, 1)))


# ---------------------------------------------------------------------------
# mean difference


def test_mean_difference_identical():
    x = RngState(10).normal((12, 3))
    assert mean_difference(x, x) == 0.0


def test_mean_difference_three_four_five():
    x = np.array([[0.0, 0.0], [0.0, 0.0]])
    y = np.array([[3.0, 4.0]])
    assert mean_difference(x, y) == pytest.approx(5.0, abs=1e-12)


def test_mean_difference_column_mean_oracle():
    rng = RngState(11)
    x = rng.normal((9, 4))
    y = rng.normal((14, 4))
    mx = np.array([x[:, j].sum() / 9 for j in range(4)])
    my = np.array([y[:, j].sum() / 14 for j in range(4)])
    want = float(np.sqrt(((mx - my) ** 2).sum()))
    assert mean_difference(x, y) == pytest.approx(want, abs=1e-12)


def test_metric_dimension_mismatch_errors():
    x2 = np.zeros((3, 2))
    x3 = np.zeros((3, 3))
    for fn in (energy_distance, mean_difference, median_heuristic):
        with pytest.raises(ValueError):
            fn(x2, x3)
    with pytest.raises(ValueError):
        mmd_squared(x2, x3, KernelSpec.gaussian(1.0))


# ---------------------------------------------------------------------------
# naive-oracle cross-checks


def _naive_energy_distance(x, y, beta):
    n, m = len(x), len(y)
    cross = sum(np.linalg.norm(a - b) ** beta for a in x for b in y) / (n * m)
    wx = sum(np.linalg.norm(a - b) ** beta for a in x for b in x) / (n * n)
    wy = sum(np.linalg.norm(a - b) ** beta for a in y for b in y) / (m * m)
    return 2 * cross - wx - wy


def test_energy_distance_matches_naive_double_loop():
    rng = RngState(12)
    x = rng.normal((8, 2))
    y = rng.normal((6, 2))
    for beta in (0.5, 1.0, 2.0):
        assert energy_distance(x, y, beta=beta) == pytest.approx(
            _naive_energy_distance(x, y, beta), abs=1e-12
        )


def test_mmd_matches_naive_double_loop():
    rng = RngState(13)
    x = rng.normal((7, 2))
    y = rng.normal((5, 2))
    bw = 1.7

    def k(a, b):
        return np.exp(-np.linalg.norm(a - b) ** 2 / (2 * bw * bw))

    kxx = sum(k(a, b) for a in x for b in x) / 49
    kxy = sum(k(a, b) for a in x for b in y) / 35
    kyy = sum(k(a, b) for a in y for b in y) / 25
    want = kxx - 2 * kxy + kyy
    assert mmd_squared(x, y, KernelSpec.gaussian(bw)) == pytest.approx(want, abs=1e-12)
