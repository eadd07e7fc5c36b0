"""Covariance test for the first knot of the group-LASSO path.

With ``U_k = Xhat^T Z_k / n`` and ``R = Z^T Z / n`` (both centered), the
path is all-zero above ``lambda1 = (2/sqrt(d)) max_k ||U_k||``. Just below it
only the row ``m`` of the maximizer is active, with a closed-form solution,
and the second covariate enters at ``lambda2``, the largest root in
``[0, lambda1]`` of a per-covariate quadratic. The statistic

    T = n d lambda1 (lambda1 - lambda2) / (4 sigma2 R_mm)

compares the fitted covariance at ``lambda2`` against the noise level.
Everything here is closed form; no solver is called except to estimate
``sigma2`` in residual mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGram, NonPositiveVariance, NonUniqueMax, OutOfKnotRange
from .regression import _prep, cross_validate, gram, group_lasso_fit, lasso_fit_column

TIE_RTOL = 1e-10
RMM_MIN = 1e-12
DISC_RTOL = 1e-10


@dataclass(frozen=True)
class KnotData:
    U: np.ndarray
    R: np.ndarray
    m: int
    lambda1: float
    lambda2: float
    n: int = 0

    @property
    def d(self):
        return self.U.shape[1]

    @property
    def u_m(self):
        return self.U[self.m]

    @property
    def r_mm(self):
        return float(self.R[self.m, self.m])


@dataclass(frozen=True)
class CovTestResult:
    statistic: float
    sigma2: float
    knots: KnotData = field(repr=False)


def _entry_root(a, b, c):
    """Largest root in ``[0, inf)`` of ``a x^2 + b x + c`` on the entering branch.

    The entering branch is ``(-b - sqrt(D)) / (2a)``; it is evaluated in the
    form that avoids subtracting nearly equal numbers, and falls back to the
    linear root ``-c / b`` when ``a`` vanishes.
    """
    disc = b * b - 4.0 * a * c
    scale = max(b * b, abs(4.0 * a * c), 1e-300)
    if disc < -DISC_RTOL * scale:
        raise ArithmeticError(f"negative discriminant {disc:.3g} in knot quadratic")
    sq = math.sqrt(max(disc, 0.0))
    if b < 0:
        return 2.0 * c / (-b + sq)
    if a == 0.0:
        # b >= 0 and c >= 0: the covariate never catches up with the active one
        return 0.0 if b == 0.0 else -c / b
    return (-b - sq) / (2.0 * a)


def knots_from_gram(U, R, n=0):
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    p, d = U.shape
    if p < 2:
        raise ValueError("the covariance test needs at least two covariates")
    norms = np.linalg.norm(U, axis=1)
    order = np.argsort(norms)[::-1]
    m = int(order[0])
    top, second = norms[order[0]], norms[order[1]]
    if top - second <= TIE_RTOL * top:
        raise NonUniqueMax(
            f"covariates {int(order[0])} and {int(order[1])} tie for the largest ||U_k|| "
            f"({top:.17g} vs {second:.17g})"
        )
    r_mm = float(R[m, m])
    if r_mm <= RMM_MIN:
        raise DegenerateGram(f"R[{m},{m}] = {r_mm:.3g}; covariate {m} has no variance")
    lambda1 = 2.0 / math.sqrt(d) * top
    um = U[m]
    lambda2 = 0.0
    for k in range(p):
        if k == m:
            continue
        A = R[m, k] / r_mm
        B = U[k] @ um - A * top * top
        w = U[k] - A * um
        a = A * A - 1.0
        b = A * 4.0 * B / (math.sqrt(d) * top)
        c = 4.0 * (w @ w) / d
        lam = _entry_root(a, b, c)
        if lam > lambda2:
            lambda2 = lam
    lambda2 = min(max(lambda2, 0.0), lambda1)
    return KnotData(U, np.asarray(R, dtype=float), m, float(lambda1), float(lambda2), int(n))


def compute_knot_data(Xhat, Z, center=True) -> KnotData:
    """Knots of the group-LASSO path of ``Xhat`` on ``Z``.

    Raises
    ------
    NonUniqueMax
        If the two largest ``||U_k||`` agree to 1e-10 relative.
    DegenerateGram
        If the leading covariate has (numerically) zero variance.
    """
    X, Z = _prep(Xhat, Z, center)
    R, U = gram(X, Z)
    return knots_from_gram(U, R, X.shape[0])


def beta_m(u_m, r_mm, lam, d=None):
    """Row ``m`` of the solution for ``lam`` in ``[lambda2, lambda1]``."""
    u_m = np.atleast_1d(np.asarray(u_m, dtype=float))
    d = u_m.size if d is None else d
    norm = float(np.linalg.norm(u_m))
    if norm <= 0:
        raise ValueError("U_m must be nonzero")
    lam1 = 2.0 * norm / math.sqrt(d)
    if lam > lam1 * (1 + 1e-12):
        raise OutOfKnotRange(f"penalty {lam:.6g} is above the first knot {lam1:.6g}")
    shrink = max(1.0 - lam * math.sqrt(d) / (2.0 * norm), 0.0)
    return shrink * u_m / r_mm


def estimate_sigma2(Xhat, Z, mode="null", seed=None, rng=None, folds=10, center=True):
    """Noise variance of ``Xhat`` entries.

    ``null`` pools the variance of the centered entries of ``Xhat``;
    ``residual`` pools the residuals of a cross-validated group-LASSO fit
    (plain LASSO when ``Xhat`` has one column).
    """
    X, Zc = _prep(Xhat, Z, center)
    n, d = X.shape
    if n * d < 2:
        raise ValueError("need at least two entries to estimate a variance")
    if mode == "null":
        return float(np.sum(X * X) / (n * d))
    if mode != "residual":
        raise ValueError(f"unknown variance mode {mode!r}")
    if d == 1:
        lam = float(cross_validate("lasso", X, Zc, folds=folds, rng=rng, seed=seed, center=False)[0])
        B = lasso_fit_column(X[:, 0], Zc, lam, center=False)[:, None]
    else:
        lam = cross_validate("glasso", X, Zc, folds=folds, rng=rng, seed=seed, center=False)
        B = group_lasso_fit(X, Zc, lam, center=False).coefficients
    res = X - Zc @ B
    return float(np.sum(res * res) / (n * d))


def cov_test_statistic(knots: KnotData, sigma2, n=None, d=None, Xhat=None, Z=None,
                       debug=False) -> CovTestResult:
    """``n d lambda1 (lambda1 - lambda2) / (4 sigma2 R_mm)``.

    With ``debug=True`` and the (centered) data supplied, the value is also
    checked against the sum of ``Xhat * Z beta(lambda2)`` over all entries.
    """
    n = knots.n if n is None else n
    d = knots.d if d is None else d
    if not sigma2 > 0:
        raise NonPositiveVariance(f"noise variance estimate is {sigma2!r}")
    l1, l2 = knots.lambda1, knots.lambda2
    T = n * d * l1 * (l1 - l2) / (4.0 * sigma2 * knots.r_mm)
    if debug:
        direct = defining_sum(knots, sigma2, Xhat, Z)
        assert abs(direct - T) <= 1e-8 * max(abs(T), 1e-300), (direct, T)
    return CovTestResult(float(T), float(sigma2), knots)


def defining_sum(knots: KnotData, sigma2, Xhat, Z, center=True):
    """Entrywise covariance between ``Xhat`` and the fit at ``lambda2``, over ``sigma2``."""
    X, Zc = _prep(Xhat, Z, center)
    b = beta_m(knots.u_m, knots.r_mm, knots.lambda2, knots.d)
    fitted = np.outer(Zc[:, knots.m], b)
    return float(np.sum(X * fitted) / sigma2)


def group_cov_test(Xhat, Z, sigma2_mode="residual", seed=None, center=True) -> CovTestResult:
    knots = compute_knot_data(Xhat, Z, center)
    s2 = estimate_sigma2(Xhat, Z, sigma2_mode, seed=seed, center=center)
    return cov_test_statistic(knots, s2)


def lasso_cov_test_per_dim(Xhat, Z, sigma2_mode="residual", seed=None, center=True):
    """One d=1 covariance test per column of ``Xhat``."""
    X = np.asarray(Xhat, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    return [group_cov_test(X[:, k], Z, sigma2_mode, seed=seed, center=center) for k in range(X.shape[1])]
