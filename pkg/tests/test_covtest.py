import math

import numpy as np
import pytest

from netdep.covtest import (KnotData, beta_m, compute_knot_data, cov_test_statistic, defining_sum,
                            estimate_sigma2, knots_from_gram, lasso_cov_test_per_dim)
from netdep.errors import DegenerateGram, NonPositiveVariance, NonUniqueMax, OutOfKnotRange
from netdep.regression import group_lasso_fit

from conftest import random_orthogonal, small_instance


def _orthogonal_design():
    Z = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    return Z[:, :1].copy(), Z


def test_orthogonal_design_by_hand():
    X, Z = _orthogonal_design()
    k = compute_knot_data(X, Z)
    assert k.m == 0
    assert np.allclose(k.U[:, 0], [1.0, 0.0])
    assert k.lambda1 == pytest.approx(2.0)
    assert k.lambda2 == 0.0
    res = cov_test_statistic(k, 1.0)
    assert res.statistic == pytest.approx(4 * 1 * 2.0 ** 2 / 4)


def test_orthogonal_design_agrees_with_path():
    X, Z = _orthogonal_design()
    X = X + 0.1 * Z[:, 1:]
    k = compute_knot_data(X, Z)
    for lam in np.linspace(k.lambda1 * 0.999, k.lambda2 * 1.001, 7):
        fit = group_lasso_fit(X, Z, lam, rtol=1e-12)
        assert fit.support.tolist() == [k.m]


def test_ties_raise():
    U = np.array([[1.0, 0.0], [0.0, 1.0], [0.1, 0.1]])
    with pytest.raises(NonUniqueMax):
        knots_from_gram(U, np.eye(3))


def test_degenerate_gram():
    U = np.array([[1.0], [0.5]])
    with pytest.raises(DegenerateGram):
        knots_from_gram(U, np.diag([0.0, 1.0]))


def test_beta_m_boundaries():
    u = np.array([3.0, 4.0])
    lam1 = 2 * 5 / math.sqrt(2)
    assert np.allclose(beta_m(u, 2.0, lam1), 0.0)
    assert np.allclose(beta_m(u, 2.0, 1e-12), u / 2.0)
    with pytest.raises(OutOfKnotRange):
        beta_m(u, 2.0, lam1 * 1.01)


def _brute_lambda2(X, Z, lam1):
    # largest penalty with two active rows: scan a descending grid, then bisect
    grid = np.linspace(lam1, 0.0, 2001)[1:-1]
    prev = lam1
    for lam in grid:
        if group_lasso_fit(X, Z, lam, rtol=1e-12).support.size >= 2:
            lo, hi = lam, prev
            break
        prev = lam
    else:
        return 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if group_lasso_fit(X, Z, mid, rtol=1e-12).support.size >= 2:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.slow
def test_knots_match_path_brute_force():
    rng = np.random.default_rng(31)
    for _ in range(5):
        X, Z = small_instance(rng)
        k = compute_knot_data(X, Z)
        assert _brute_lambda2(X, Z, k.lambda1) == pytest.approx(k.lambda2, rel=1e-6)


def test_lambda1_threshold():
    rng = np.random.default_rng(2)
    for _ in range(20):
        X, Z = small_instance(rng)
        k = compute_knot_data(X, Z)
        assert group_lasso_fit(X, Z, k.lambda1 * (1 + 1e-3)).support.size == 0
        assert group_lasso_fit(X, Z, k.lambda1 * (1 - 1e-3)).support.tolist() == [k.m]


def test_first_segment_matches_solver():
    rng = np.random.default_rng(3)
    for _ in range(10):
        X, Z = small_instance(rng)
        k = compute_knot_data(X, Z)
        lam = 0.5 * (k.lambda1 + k.lambda2)
        fit = group_lasso_fit(X, Z, lam, rtol=1e-12)
        assert np.allclose(fit.coefficients[k.m], beta_m(k.u_m, k.r_mm, lam), atol=1e-6)


def test_statistic_equals_defining_sum():
    rng = np.random.default_rng(4)
    for _ in range(20):
        X, Z = small_instance(rng)
        k = compute_knot_data(X, Z)
        s2 = rng.uniform(0.5, 2.0)
        res = cov_test_statistic(k, s2, Xhat=X, Z=Z, debug=True)
        assert res.statistic == pytest.approx(defining_sum(k, s2, X, Z), rel=1e-8)


def test_statistic_zero_when_knots_coincide():
    k = KnotData(np.array([[1.0], [0.5]]), np.eye(2), 0, 2.0, 2.0, 10)
    assert cov_test_statistic(k, 1.0).statistic == 0.0


def test_statistic_needs_positive_variance():
    k = KnotData(np.array([[1.0], [0.5]]), np.eye(2), 0, 2.0, 1.0, 10)
    with pytest.raises(NonPositiveVariance):
        cov_test_statistic(k, 0.0)


def test_statistic_reproducible_from_fields():
    rng = np.random.default_rng(5)
    X, Z = small_instance(rng)
    res = cov_test_statistic(compute_knot_data(X, Z), 1.3)
    k = res.knots
    again = k.n * k.d * k.lambda1 * (k.lambda1 - k.lambda2) / (4 * res.sigma2 * k.r_mm)
    assert res.statistic == pytest.approx(again, rel=1e-12)


def test_rotation_invariance():
    rng = np.random.default_rng(6)
    X, Z = small_instance(rng)
    k = compute_knot_data(X, Z)
    T = cov_test_statistic(k, estimate_sigma2(X, Z)).statistic
    for _ in range(5):
        Q = random_orthogonal(rng, 3)
        kq = compute_knot_data(X @ Q, Z)
        assert kq.m == k.m
        assert kq.lambda1 == pytest.approx(k.lambda1, rel=1e-10)
        assert kq.lambda2 == pytest.approx(k.lambda2, rel=1e-10)
        assert cov_test_statistic(kq, estimate_sigma2(X @ Q, Z)).statistic == pytest.approx(T, rel=1e-10)


def test_null_variance_constant_is_zero():
    X = np.ones((10, 2))
    Z = np.random.default_rng(0).standard_normal((10, 3))
    assert estimate_sigma2(X, Z, "null") == 0.0


def test_null_variance_monte_carlo():
    rng = np.random.default_rng(7)
    X = rng.normal(0, 2, size=(1000, 2))
    assert estimate_sigma2(X, rng.standard_normal((1000, 3)), "null") == pytest.approx(4.0, rel=0.1)


def test_residual_variance_of_exact_fit_is_small():
    rng = np.random.default_rng(8)
    Z = rng.standard_normal((80, 5))
    X = Z @ rng.standard_normal((5, 2))
    assert estimate_sigma2(X, Z, "residual", seed=1) < 1e-3 * estimate_sigma2(X, Z, "null")


def test_residual_variance_is_below_null():
    rng = np.random.default_rng(9)
    X, Z = small_instance(rng, n=60, p=10, d=2)
    assert estimate_sigma2(X, Z, "residual", seed=0) <= estimate_sigma2(X, Z, "null") + 1e-12


def test_per_dimension_d1_matches_group_pipeline():
    rng = np.random.default_rng(10)
    X, Z = small_instance(rng, n=50, p=8, d=1)
    from netdep.covtest import group_cov_test
    per = lasso_cov_test_per_dim(X, Z, seed=3)
    assert len(per) == 1
    assert per[0].statistic == group_cov_test(X, Z, seed=3).statistic


def test_per_dimension_statistics_differ():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((100, 3))
    Z = rng.standard_normal((100, 10))
    stats = [r.statistic for r in lasso_cov_test_per_dim(X, Z, sigma2_mode="null")]
    assert len(set(stats)) == 3


@pytest.mark.slow
def test_strong_entry_wins_its_dimension():
    # one strong coefficient in the second latent dimension
    hits = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        Z = rng.standard_normal((100, 20))
        X = rng.standard_normal((100, 3))
        X[:, 1] += 1.0 * Z[:, 4]
        stats = [r.statistic for r in lasso_cov_test_per_dim(X, Z, sigma2_mode="null")]
        hits += int(np.argmax(stats) == 1)
    assert hits >= 40
