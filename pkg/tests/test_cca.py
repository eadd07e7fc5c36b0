import math

import numpy as np
import pytest
from scipy.optimize import minimize

from netdep.cca import (cca_coefficient, cca_replicates, covariance_blocks, default_gamma,
                        inv_sqrt_psd, network_cca_coefficient, network_cca_replicates)
from netdep.errors import NotPositiveDefinite, SingularCovariance
from netdep.graph_model import ScenarioSpec, generate_scenario

from conftest import random_orthogonal


def test_blocks_of_constant_and_identical_inputs(rng):
    b = covariance_blocks(np.ones((10, 2)), rng.standard_normal((10, 3)))
    assert np.allclose(b.sigma_x, 0)
    X = rng.standard_normal((20, 3))
    b = covariance_blocks(X, X)
    assert np.allclose(b.sigma_x, b.sigma_z) and np.allclose(b.sigma_x, b.sigma_xz)


def test_blocks_monte_carlo(rng):
    C = np.array([[0.4, 0.3, 0.0], [0.0, -0.3, 0.4]])
    S = np.block([[np.eye(2), C], [C.T, np.eye(3)]])
    assert np.linalg.eigvalsh(S)[0] > 0
    W = rng.multivariate_normal(np.zeros(5), S, size=10_000)
    b = covariance_blocks(W[:, :2], W[:, 2:])
    assert np.linalg.norm(b.assembled() - S) <= 0.05 * np.linalg.norm(S)
    assert np.max(np.abs(b.sigma_xz - C)) < 0.05


def test_assembled_blocks_are_psd(rng):
    b = covariance_blocks(rng.standard_normal((15, 3)), rng.standard_normal((15, 20)))
    assert np.linalg.eigvalsh(b.assembled())[0] > -1e-8


def test_self_alignment_is_one(rng):
    X = rng.standard_normal((30, 3))
    assert cca_coefficient(X, X, 0.0).rho == pytest.approx(1.0, abs=1e-10)


def test_zero_cross_covariance_gives_zero():
    X = np.array([1.0, -1.0, 1.0, -1.0])[:, None]
    Z = np.array([[1.0], [1.0], [-1.0], [-1.0]])
    assert cca_coefficient(X, Z, 0.0).rho == pytest.approx(0.0, abs=1e-12)


def _corr(Xc, Zc, u, v):
    a, b = Xc @ u, Zc @ v
    return abs(a @ b) / math.sqrt((a @ a) * (b @ b))


def test_matches_direct_maximisation():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((50, 2))
    Z = 0.5 * X @ rng.standard_normal((2, 3)) + rng.standard_normal((50, 3))
    Xc, Zc = X - X.mean(0), Z - Z.mean(0)
    U = rng.standard_normal((1_000_000, 2))
    V = rng.standard_normal((1_000_000, 3))
    A, B = U @ Xc.T, V @ Zc.T
    # chunked correlation of every random pair (u_i, v_i)
    best, arg = -1.0, 0
    for s in range(0, 1_000_000, 100_000):
        a, b = A[s:s + 100_000], B[s:s + 100_000]
        c = np.abs(np.sum(a * b, 1)) / np.sqrt(np.sum(a * a, 1) * np.sum(b * b, 1))
        i = int(np.argmax(c))
        if c[i] > best:
            best, arg = float(c[i]), s + i
    x0 = np.concatenate([U[arg], V[arg]])
    res = minimize(lambda w: -_corr(Xc, Zc, w[:2], w[2:]), x0, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
    oracle = -res.fun
    out = cca_coefficient(X, Z, 0.0)
    assert out.rho == pytest.approx(oracle, abs=1e-4)
    assert _corr(Xc, Zc, out.direction_u, out.direction_v) == pytest.approx(out.rho, abs=1e-10)
    assert np.linalg.norm(out.direction_u) == pytest.approx(1.0)
    assert np.linalg.norm(out.direction_v) == pytest.approx(1.0)


def test_rho_is_top_singular_value(rng):
    X, Z = rng.standard_normal((40, 3)), rng.standard_normal((40, 5))
    b = covariance_blocks(X, Z)
    C = inv_sqrt_psd(b.sigma_x) @ b.sigma_xz @ inv_sqrt_psd(b.sigma_z)
    assert cca_coefficient(X, Z, 0.0).rho == pytest.approx(np.linalg.svd(C, compute_uv=False)[0], abs=1e-10)


def test_singular_covariance_without_ridge(rng):
    X = rng.standard_normal((10, 2))
    Z = rng.standard_normal((10, 20))
    with pytest.raises(SingularCovariance):
        cca_coefficient(X, Z, 0.0)
    assert 0 <= cca_coefficient(X, Z).rho <= 1


def test_default_gamma_rule(rng):
    assert default_gamma(rng.standard_normal((100, 10))) == 0.0
    Z = rng.standard_normal((100, 60))
    Zc = Z - Z.mean(0)
    assert default_gamma(Z) == pytest.approx(1e-3 * np.trace(Zc.T @ Zc / 100) / 60)


def test_orthogonal_invariance(rng):
    X, Z = rng.standard_normal((40, 3)), rng.standard_normal((40, 5))
    rho = cca_coefficient(X, Z, 0.0).rho
    for _ in range(10):
        Q = random_orthogonal(rng, 3)
        assert cca_coefficient(X @ Q, Z, 0.0).rho == pytest.approx(rho, abs=1e-10)
        assert cca_coefficient(X @ Q, Z, 0.1).rho == pytest.approx(cca_coefficient(X, Z, 0.1).rho, abs=1e-10)


def test_block_scaling_invariance(rng):
    X, Z = rng.standard_normal((40, 3)), rng.standard_normal((40, 4))
    T = rng.standard_normal((4, 4)) + 3 * np.eye(4)
    assert cca_coefficient(X, Z @ T, 0.0).rho == pytest.approx(cca_coefficient(X, Z, 0.0).rho, abs=1e-8)


def test_monotone_in_gamma_and_tau(rng):
    X = rng.standard_normal((40, 3))
    Z = X @ rng.standard_normal((3, 4)) + rng.standard_normal((40, 4))
    rhos = [cca_coefficient(X, Z, g).rho for g in [0, 1e-3, 1e-2, 0.1, 1, 10]]
    assert np.all(np.diff(rhos) <= 1e-12)
    A = X @ X.T + rng.standard_normal((40, 40))
    A = (A + A.T) / 2
    rhos = [network_cca_coefficient(A, Z, tau, 0.0).rho for tau in [0.1, 1, 10, 100]]
    assert np.all(np.diff(rhos) <= 1e-12)


def test_network_cca_matches_explicit_inverse_root(rng):
    n = 30
    X = rng.standard_normal((n, 2))
    Z = rng.standard_normal((n, 3))
    A = X @ X.T + rng.standard_normal((n, n))
    A = (A + A.T) / 2
    M = np.eye(n) - 1.0 / n
    Zc = M @ Z
    tau = math.sqrt(n)
    C = inv_sqrt_psd(A @ M @ A / n, tau) @ (A @ M @ Z / n) @ inv_sqrt_psd(Zc.T @ Zc / n)
    out = network_cca_coefficient(A, Z, gamma_z=0.0)
    assert out.rho == pytest.approx(np.linalg.norm(C, 2), abs=1e-10)
    assert out.regularization[1] == pytest.approx(tau)


def test_network_cca_large_tau(rng):
    A = rng.random((30, 30))
    A = (A + A.T) / 2
    assert network_cca_coefficient(A, rng.standard_normal((30, 3)), 1e12, 0.0).rho < 1e-4


def test_replicate_helpers_match_direct(rng):
    X, Z = rng.standard_normal((30, 2)), rng.standard_normal((30, 4))
    A = X @ X.T + rng.standard_normal((30, 30))
    A = (A + A.T) / 2
    perm = rng.permutation(30)
    assert cca_replicates(X, Z, 0.0)(perm) == pytest.approx(cca_coefficient(X, Z[perm], 0.0).rho, abs=1e-12)
    assert network_cca_replicates(A, Z, None, 0.0)(perm) == pytest.approx(
        network_cca_coefficient(A, Z[perm], None, 0.0).rho, abs=1e-12)


def test_inv_sqrt_psd():
    assert np.allclose(inv_sqrt_psd(np.eye(3)), np.eye(3))
    assert np.allclose(inv_sqrt_psd(np.diag([4.0, 0.0]), mode="pseudo"), np.diag([0.5, 0.0]))
    with pytest.raises(NotPositiveDefinite):
        inv_sqrt_psd(np.diag([4.0, 0.0]))
    with pytest.raises(ValueError):
        inv_sqrt_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_pseudo_inverse_root_projects_onto_range(rng):
    G = rng.standard_normal((5, 3))
    M = G @ G.T
    H = inv_sqrt_psd(M, mode="pseudo")
    P = G @ np.linalg.pinv(G)
    assert np.allclose(H @ H @ M, P, atol=1e-8)


def test_shuffled_covariates_lower_rho():
    wins = 0
    for seed in range(20):
        draw = generate_scenario(ScenarioSpec("i", 100, 20, 2, 1.0, seed=1), rng=seed)
        Z = draw.covariates
        rho = cca_coefficient(draw.latent, Z).rho
        perm = np.random.default_rng(seed).permutation(100)
        wins += cca_coefficient(draw.latent, Z[perm]).rho < rho
    assert wins >= 19


@pytest.mark.slow
def test_network_cca_consistency():
    gaps = []
    for seed in range(20):
        draw = generate_scenario(ScenarioSpec("i", 400, 10, 4, 1.0, seed=1), rng=seed)
        rx = cca_coefficient(draw.latent, draw.covariates, 0.0).rho
        ra = network_cca_coefficient(draw.graph, draw.covariates, gamma_z=0.0).rho
        gaps.append(abs(ra - rx))
    assert np.median(gaps) <= 0.1
