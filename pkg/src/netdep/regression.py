"""Regressing (estimated) latent positions on node covariates.

Three estimators of ``B`` in ``Xhat ~ Z B``:

* ridge, one penalty per latent dimension, closed form;
* LASSO, one penalty per latent dimension, cyclic coordinate descent;
* group LASSO over the rows of ``B`` (a row per covariate), block
  coordinate descent with an exact group soft-threshold per row.

Inputs are column-centered before fitting unless ``center=False``, which is
the same as fitting an unpenalized intercept.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.linear_model import lars_path_gram

from . import _kernels
from ._rng import stream
from .errors import MaxIterations, SingularSystem

MAX_SWEEPS = 100_000
KKT_RTOL = 1e-7
SNAP = 1e-12
POLISH_EVERY = 50


def center_columns(M):
    M = np.asarray(M, dtype=float)
    return M - M.mean(axis=0)


def _prep(Xhat, Z, center):
    X = np.asarray(Xhat, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Z = np.asarray(Z, dtype=float)
    if X.shape[0] != Z.shape[0]:
        raise ValueError(f"row mismatch: Xhat has {X.shape[0]} rows, Z has {Z.shape[0]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Z))):
        raise ValueError("inputs must be finite")
    if center:
        X, Z = center_columns(X), center_columns(Z)
    return X, Z


def gram(X, Z):
    """``R = Z^T Z / n`` and ``U = Z^T X / n``."""
    n = Z.shape[0]
    return (Z.T @ Z) / n, (Z.T @ X) / n


@dataclass(frozen=True)
class RidgeFit:
    coefficients: np.ndarray
    penalties: np.ndarray


@dataclass(frozen=True)
class GroupLassoFit:
    coefficients: np.ndarray
    penalty: float
    objective: float
    kkt_residual: float
    sweeps: int = 0

    @property
    def support(self):
        return np.flatnonzero(np.linalg.norm(self.coefficients, axis=1) > 0)

    @property
    def row_norms(self):
        return np.linalg.norm(self.coefficients, axis=1)


def ridge_fit(Xhat, Z, penalties, center=True) -> RidgeFit:
    """Column-wise ridge: ``b_k = (Z^T Z/n + lam_k I)^{-1} Z^T Xhat_k / n``."""
    X, Z = _prep(Xhat, Z, center)
    n, p = Z.shape
    d = X.shape[1]
    lam = np.broadcast_to(np.asarray(penalties, dtype=float), (d,)).copy()
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("ridge penalties must be finite and >= 0")
    R, U = gram(X, Z)
    B = np.empty((p, d))
    for k in range(d):
        if lam[k] == 0 and np.linalg.cond(R) > 1e12:
            raise SingularSystem("unpenalized ridge needs Z^T Z to have full rank")
        try:
            cho = linalg.cho_factor(R + lam[k] * np.eye(p), check_finite=False)
        except linalg.LinAlgError as exc:
            raise SingularSystem(f"Z^T Z/n + {lam[k]} I is not positive definite") from exc
        B[:, k] = linalg.cho_solve(cho, U[:, k], check_finite=False)
    return RidgeFit(B, lam)


def _tol(U, d, rtol):
    scale = (2.0 / d) * np.max(np.linalg.norm(U, axis=1)) if U.size else 0.0
    return rtol * (scale if scale > 0 else 1.0)


def lasso_fit_column(xcol, Z, lam, center=True, rtol=KKT_RTOL, max_sweeps=MAX_SWEEPS, warm=None):
    """Minimize ``(1/n)||x - Z b||^2 + lam ||b||_1`` by cyclic coordinate descent."""
    X, Z = _prep(xcol, Z, center)
    R, U = gram(X, Z)
    return _lasso_from_gram(R, U[:, 0], lam, rtol, max_sweeps, warm)


def _lasso_from_gram(R, u, lam, rtol=KKT_RTOL, max_sweeps=MAX_SWEEPS, warm=None):
    if lam < 0:
        raise ValueError("penalty must be >= 0")
    b = np.zeros(u.shape[0]) if warm is None else np.array(warm, dtype=float)
    tol = _tol(u[:, None], 1, rtol)
    used = 0
    while True:
        status, sweeps, kkt = _kernels.lasso_cd(R, u, float(lam), b, tol, min(POLISH_EVERY, max_sweeps - used))
        used += sweeps
        if status == 0:
            break
        if used >= max_sweeps:
            raise MaxIterations(
                f"LASSO did not reach KKT tolerance {tol:.3g} in {used} sweeps (residual {kkt:.3g})"
            )
        _polish_lasso(R, u, lam, b)
    b[np.abs(b) < SNAP] = 0.0
    return b


def _polish_lasso(R, u, lam, b):
    """Exact solve on the current support and sign pattern, kept only if sign-consistent."""
    A = np.flatnonzero(b)
    if A.size == 0:
        return
    signs = np.sign(b[A])
    RA, uA = R[np.ix_(A, A)], u[A]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        try:
            x = linalg.solve(RA, uA - 0.5 * lam * signs, assume_a="sym", check_finite=False)
        except (linalg.LinAlgError, ValueError):
            return
    if not (np.all(np.isfinite(x)) and np.all(np.sign(x) == signs)):
        return

    def f(v):
        return v @ (RA @ v) - 2.0 * (v @ uA) + lam * np.sum(np.abs(v))

    if f(x) < f(b[A]):
        b[A] = x


def group_lasso_fit(Xhat, Z, lam, center=True, rtol=KKT_RTOL, max_sweeps=MAX_SWEEPS,
                    warm=None, debug=False) -> GroupLassoFit:
    """Multitask group LASSO over the rows of ``B``.

    Minimizes ``(1/(n d))||Xhat - Z B||_F^2 + (lam/sqrt(d)) sum_j ||B_j||``.
    Returns once the subgradient optimality system holds to within
    ``rtol`` times the gradient scale at zero; raises ``MaxIterations``
    otherwise. With ``debug=True`` the objective is checked to be
    non-increasing across sweeps.
    """
    X, Z = _prep(Xhat, Z, center)
    R, U = gram(X, Z)
    const = np.sum(X * X) / (X.shape[0] * X.shape[1])
    return _glasso_from_gram(R, U, lam, rtol, max_sweeps, warm, debug, const)


def _glasso_from_gram(R, U, lam, rtol=KKT_RTOL, max_sweeps=MAX_SWEEPS, warm=None,
                      debug=False, const=0.0):
    if lam < 0:
        raise ValueError("penalty must be >= 0")
    p, d = U.shape
    beta = np.zeros((p, d)) if warm is None else np.array(warm, dtype=float)
    tol = _tol(U, d, rtol)
    used = 0
    while True:
        budget = min(POLISH_EVERY, max_sweeps - used)
        trace = np.empty(budget if debug else 0)
        status, sweeps, kkt = _kernels.glasso_bcd(R, U, float(lam), beta, tol, budget, trace)
        if debug:
            t = trace[:min(sweeps, trace.size)]
            scale = max(1.0, float(np.max(np.abs(t)))) if t.size else 1.0
            assert np.all(np.diff(t) <= 1e-12 * scale), "objective increased between sweeps"
        used += sweeps
        if status == 0:
            break
        if used >= max_sweeps:
            raise MaxIterations(
                f"group LASSO did not reach KKT tolerance {tol:.3g} in {used} sweeps (residual {kkt:.3g})"
            )
        _polish_glasso(R, U, lam, beta, tol)
    beta[np.linalg.norm(beta, axis=1) < SNAP] = 0.0
    G = R @ beta
    objective = const + float(_kernels._glasso_objective(R, U, beta, float(lam), G))
    kkt = float(_kernels._glasso_kkt(R, U, beta, float(lam), G))
    return GroupLassoFit(beta, float(lam), objective, kkt, int(used))


def _polish_glasso(R, U, lam, beta, tol, max_newton=30):
    """Damped Newton on the rows that are currently nonzero.

    On a fixed support the objective is smooth, and Newton converges in a
    handful of steps where block coordinate descent crawls (nearly collinear
    active covariates). The result is accepted only if it lowers the
    objective; the caller re-certifies optimality with a full BCD sweep.
    """
    A = np.flatnonzero(np.linalg.norm(beta, axis=1) > 0)
    d = U.shape[1]
    if A.size == 0 or A.size * d > 2000:
        return
    RA, UA = R[np.ix_(A, A)], U[A]
    c = lam / math.sqrt(d)

    def f(x):
        return (np.sum(x * (RA @ x)) - 2.0 * np.sum(x * UA)) / d + c * np.sum(np.linalg.norm(x, axis=1))

    x = beta[A].copy()
    f0 = fx = f(x)
    H0 = (2.0 / d) * np.kron(RA, np.eye(d))
    for _ in range(max_newton):
        nrm = np.linalg.norm(x, axis=1)
        if np.any(nrm <= 1e-14):
            break
        g = (2.0 / d) * (RA @ x - UA) + c * x / nrm[:, None]
        if np.max(np.linalg.norm(g, axis=1)) <= 0.1 * tol:
            break
        H = H0.copy()
        for i, j in enumerate(A):
            v = x[i] / nrm[i]
            blk = slice(i * d, (i + 1) * d)
            H[blk, blk] += (c / nrm[i]) * (np.eye(d) - np.outer(v, v))
        try:
            step = linalg.solve(H, g.ravel(), assume_a="pos", check_finite=False)
        except (linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(H, g.ravel(), rcond=None)[0]
        step = step.reshape(x.shape)
        slope = float(np.sum(g * step))
        if not slope > 0:
            break
        t = 1.0
        while t > 1e-10:
            xn = x - t * step
            fn = f(xn)
            if fn <= fx - 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        x, fx = xn, fn
    if fx < f0:
        beta[A] = x


def glasso_kkt_residual(Xhat, Z, beta, lam, center=True):
    """Largest violation of the group-LASSO optimality system at ``beta``."""
    X, Z = _prep(Xhat, Z, center)
    R, U = gram(X, Z)
    beta = np.asarray(beta, dtype=float)
    return float(_kernels._glasso_kkt(R, U, beta, float(lam), R @ beta))


def lambda_max(Xhat, Z, method="glasso", center=True):
    """Smallest penalty with an all-zero solution (per column for ``lasso``)."""
    X, Z = _prep(Xhat, Z, center)
    _, U = gram(X, Z)
    if method == "glasso":
        return 2.0 / math.sqrt(X.shape[1]) * float(np.max(np.linalg.norm(U, axis=1)))
    if method == "lasso":
        return 2.0 * np.max(np.abs(U), axis=0)
    raise ValueError(method)


def default_grid(top, n_points=50, ratio=1e-3):
    top = float(top)
    if top <= 0:
        return np.array([0.0])
    return np.geomspace(top, top * ratio, n_points)


def ridge_grid(Z, n_points=50):
    Zc = center_columns(Z)
    c = float(np.sum(Zc * Zc) / Zc.shape[0] / Zc.shape[1])
    c = c if c > 0 else 1.0
    return np.geomspace(1e3 * c, 1e-3 * c, n_points)


def make_folds(n, K, rng):
    if K < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    if K > n:
        raise ValueError(f"cannot split {n} rows into {K} folds")
    return np.array_split(rng.permutation(n), K)


def _as_rng(rng, seed):
    if rng is not None:
        return rng
    return stream(0 if seed is None else seed, 7)


class RidgeCV:
    """K-fold ridge cross-validation with the covariate side factored once.

    The folds and the SVD of every training block of ``Z`` are fixed at
    construction; :meth:`select` and :meth:`fit` can then be called for many
    responses (e.g. row-permuted ``Xhat``) at the cost of small matrix
    products only.
    """

    def __init__(self, Z, grid=None, folds=10, rng=None, seed=None, center=True):
        Z = np.asarray(Z, dtype=float)
        self.n = Z.shape[0]
        self.center = center
        self.grid = np.sort(np.asarray(ridge_grid(Z) if grid is None else grid, dtype=float))[::-1]
        self.folds = make_folds(self.n, folds, _as_rng(rng, seed))
        self._blocks = []
        for test in self.folds:
            train = np.setdiff1d(np.arange(self.n), test, assume_unique=True)
            Ztr, Zte = Z[train], Z[test]
            if center:
                mu = Ztr.mean(axis=0)
                Ztr, Zte = Ztr - mu, Zte - mu
            Uz, s, Vt = np.linalg.svd(Ztr, full_matrices=False)
            m = train.size
            shrink = s[None, :] / (s[None, :] ** 2 + m * self.grid[:, None])
            self._blocks.append((train, test, Uz.T, Zte @ Vt.T, shrink))
        Zc = center_columns(Z) if center else Z
        Uz, s, Vt = np.linalg.svd(Zc, full_matrices=False)
        self._full = (Uz.T, s, Vt.T)

    def errors(self, Xhat):
        """Held-out squared error, shape ``(len(grid), d)``, summed over folds / n."""
        X = np.asarray(Xhat, dtype=float)
        X = X[:, None] if X.ndim == 1 else X
        err = np.zeros((self.grid.size, X.shape[1]))
        for train, test, Ut, W, shrink in self._blocks:
            Xtr = X[train]
            mu = Xtr.mean(axis=0) if self.center else 0.0
            h = Ut @ (Xtr - mu)
            pred = np.einsum("tr,gr,rk->gtk", W, shrink, h) + mu
            err += np.sum((pred - X[test][None]) ** 2, axis=1)
        return err / self.n

    def select(self, Xhat):
        # argmin returns the first minimizer, i.e. the largest penalty on ties
        return self.grid[np.argmin(self.errors(Xhat), axis=0)]

    def fit(self, Xhat, penalties=None):
        X = np.asarray(Xhat, dtype=float)
        X = X[:, None] if X.ndim == 1 else X
        lam = self.select(X) if penalties is None else np.broadcast_to(penalties, (X.shape[1],))
        Ut, s, V = self._full
        Xc = center_columns(X) if self.center else X
        h = Ut @ Xc
        shrink = s[None, :] / (s[None, :] ** 2 + self.n * np.asarray(lam)[:, None])
        B = V @ (shrink.T * h)
        return RidgeFit(B, np.asarray(lam, dtype=float))


def _fold_grams(X, Z, folds, center):
    n = X.shape[0]
    out = []
    for test in folds:
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        Xtr, Ztr, Xte, Zte = X[train], Z[train], X[test], Z[test]
        if center:
            mx, mz = Xtr.mean(axis=0), Ztr.mean(axis=0)
            Xtr, Ztr, Xte, Zte = Xtr - mx, Ztr - mz, Xte - mx, Zte - mz
        R, U = gram(Xtr, Ztr)
        out.append((R, U, Xte, Zte, np.sum(Xtr * Xtr, axis=0) / Xtr.shape[0]))
    return out


def _saturated(n_active, R, U, beta, tss, rank):
    """Path stopping rule: the fit interpolates the training rows.

    Mirrors glmnet: stop once the active set reaches the rank of the training
    design (rows, minus one after centering) or 99.9% of the training
    variance is explained. Penalties beyond this point are not evaluated and
    cannot be selected.
    """
    if n_active >= rank:
        return True
    rss = np.sum(tss) - 2.0 * np.sum(beta * U) + np.sum(beta * (R @ beta))
    return rss <= 1e-3 * np.sum(tss)


def _lars_starts(R, u, lams):
    """LARS-lasso path evaluated at each penalty, used as warm starts.

    The path is piecewise linear, so interpolating between knots is exact in
    exact arithmetic; coordinate descent then only has to certify the KKT
    conditions, which is far cheaper than crawling along an ill-conditioned
    path near saturation.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alphas, _, coefs = lars_path_gram(u, R, n_samples=1, method="lasso",
                                             alpha_min=float(np.min(lams)) / 2.0)
    # lars works with (1/2)||.||^2, hence alpha = lam / 2; alphas are decreasing
    a = np.clip(np.asarray(lams) / 2.0, alphas[-1], alphas[0])
    hi = np.clip(np.searchsorted(-alphas, -a, side="left"), 1, alphas.size - 1)
    lo = hi - 1
    span = alphas[lo] - alphas[hi]
    w = np.where(span > 0, (alphas[lo] - a) / np.where(span > 0, span, 1.0), 0.0)
    return (coefs[:, lo] * (1 - w) + coefs[:, hi] * w).T


def _pick(grid, total, per_fold, rule):
    """Index of the chosen penalty along axis 0 (grids are descending).

    ``min`` takes the smallest mean error, ``1se`` the largest penalty whose
    error is within one standard error of that minimum; ties go to the
    larger penalty either way.
    """
    best = np.argmin(total, axis=0)
    if rule == "min":
        return best
    if rule != "1se":
        raise ValueError(f"unknown selection rule {rule!r}")
    K = per_fold.shape[0]
    with np.errstate(invalid="ignore"):
        se = np.std(per_fold, axis=0, ddof=1) / math.sqrt(K)
    if total.ndim == 1:
        bound = total[best] + se[best]
        return int(np.flatnonzero(total <= bound)[0])
    cols = np.arange(total.shape[1])
    bound = total[best, cols] + se[best, cols]
    return np.argmax(total <= bound[None, :], axis=0)


def cross_validate(method, Xhat, Z, lambda_grid=None, folds=10, rng=None, seed=None,
                   center=True, return_errors=False, rule="min"):
    """K-fold cross-validated penalty.

    Folds are contiguous blocks of a seeded row shuffle. With ``rule="min"``
    the penalty with the smallest mean held-out squared error is returned
    (per latent dimension for ``ridge`` and ``lasso``, a single value for
    ``glasso``), ties going to the largest penalty; ``rule="1se"`` applies
    the one-standard-error rule instead (LASSO variants only).
    """
    X = np.asarray(Xhat, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    Z = np.asarray(Z, dtype=float)
    n, d = X.shape
    rng = _as_rng(rng, seed)

    if method == "ridge":
        if rule != "min":
            raise ValueError("ridge cross-validation supports rule='min' only")
        cv = RidgeCV(Z, grid=lambda_grid, folds=folds, rng=rng, center=center)
        err = cv.errors(X)
        choice = cv.grid[np.argmin(err, axis=0)]
        return (choice, cv.grid, err) if return_errors else choice

    fold_list = make_folds(n, folds, rng)
    if method == "glasso":
        grid = default_grid(lambda_max(X, Z, "glasso", center)) if lambda_grid is None else lambda_grid
        grid = np.sort(np.asarray(grid, dtype=float))[::-1]
        per_fold = np.zeros((len(fold_list), grid.size))
        for f, (R, U, Xte, Zte, tss) in enumerate(_fold_grams(X, Z, fold_list, center)):
            beta = None
            for g, lam in enumerate(grid):
                fit = _glasso_from_gram(R, U, lam, warm=beta)
                beta = fit.coefficients
                per_fold[f, g] = np.sum((Xte - Zte @ beta) ** 2)
                if _saturated(fit.support.size, R, U, beta, tss, n - Xte.shape[0] - int(center)):
                    per_fold[f, g + 1:] = np.inf
                    break
        err = per_fold.sum(axis=0) / (n * d)
        sizes = np.array([t.size for t in fold_list], dtype=float)[:, None]
        choice = float(grid[_pick(grid, err, per_fold / (sizes * d), rule)])
        return (choice, grid, err) if return_errors else choice

    if method == "lasso":
        if lambda_grid is None:
            tops = lambda_max(X, Z, "lasso", center)
            grids = np.stack([default_grid(t) for t in tops], axis=1)
        else:
            g = np.sort(np.asarray(lambda_grid, dtype=float))[::-1]
            grids = np.repeat(g[:, None], d, axis=1)
        per_fold = np.zeros((len(fold_list),) + grids.shape)
        for f, (R, U, Xte, Zte, tss) in enumerate(_fold_grams(X, Z, fold_list, center)):
            for k in range(d):
                starts = _lars_starts(R, U[:, k], grids[:, k])
                for g in range(grids.shape[0]):
                    b = _lasso_from_gram(R, U[:, k], grids[g, k], warm=starts[g])
                    per_fold[f, g, k] = np.sum((Xte[:, k] - Zte @ b) ** 2)
                    if _saturated(np.count_nonzero(b), R, U[:, k:k + 1], b[:, None], tss[k:k + 1],
                                  n - Xte.shape[0] - int(center)):
                        per_fold[f, g + 1:, k] = np.inf
                        break
        err = per_fold.sum(axis=0) / n
        sizes = np.array([t.size for t in fold_list], dtype=float)[:, None, None]
        idx = _pick(grids, err, per_fold / sizes, rule)
        choice = grids[idx, np.arange(d)]
        return (choice, grids, err) if return_errors else choice

    raise ValueError(f"unknown method {method!r}")
