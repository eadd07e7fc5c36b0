"""Permutation calibration for the five dependence statistics.

Every replicate recomputes a statistic after shuffling the rows of ``Z``
(equivalently, shuffling ``Xhat`` by the inverse permutation). Replicate
``r`` draws its permutation from its own stream ``(seed, 1, r)``, so results
do not depend on how replicates are scheduled across workers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from joblib import Parallel, delayed

from . import covtest
from ._rng import fresh_seed, stream
from .cca import cca_replicates, network_cca_replicates
from .errors import NonUniqueMax
from .regression import RidgeCV, _prep, gram

METHODS = ("ridge", "lasso", "glasso", "cca", "netcca")
REPLICATE_KEY = 1


@dataclass
class TestOutcome:
    method: str
    observed: float
    replicates: np.ndarray
    p_value: float
    n_perm: int
    seed: int
    config: dict = field(default_factory=dict)
    per_dimension: Optional[list] = None

    __test__ = False  # not a pytest class

    def to_dict(self, include_replicates=True):
        out = {
            "method": self.method,
            "observed": float(self.observed),
            "p_value": float(self.p_value),
            "n_perm": int(self.n_perm),
            "seed": int(self.seed),
            "config": self.config,
        }
        if include_replicates:
            out["replicates"] = [float(x) for x in self.replicates]
        if self.per_dimension is not None:
            dims = []
            for entry in self.per_dimension:
                e = {"dimension": int(entry["dimension"]), "observed": float(entry["observed"]),
                     "p_value": float(entry["p_value"])}
                if include_replicates:
                    e["replicates"] = [float(x) for x in entry["replicates"]]
                dims.append(e)
            out["per_dimension"] = dims
        return out

    def to_json(self, include_replicates=True, **kw):
        return json.dumps(self.to_dict(include_replicates), **kw)

    @classmethod
    def from_dict(cls, data):
        dims = data.get("per_dimension")
        if dims is not None:
            dims = [dict(e, replicates=np.asarray(e.get("replicates", []), dtype=float)) for e in dims]
        return cls(data["method"], data["observed"], np.asarray(data.get("replicates", []), dtype=float),
                   data["p_value"], data["n_perm"], data["seed"], data.get("config", {}), dims)


def add_one_p_value(observed, replicates):
    """``(1 + #{replicates >= observed}) / (n_perm + 1)``."""
    reps = np.asarray(replicates, dtype=float)
    return float((1 + np.count_nonzero(reps >= observed)) / (reps.size + 1))


def bonferroni_combine(p_values):
    """``d * min(p)``; left unclipped, so it can exceed one."""
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        raise ValueError("need at least one p-value")
    return float(p.size * p.min())


def _one_replicate(statistic, n, seed, r):
    try:
        return statistic(stream(seed, REPLICATE_KEY, r).permutation(n))
    except NonUniqueMax:
        pass
    try:
        return statistic(stream(seed, REPLICATE_KEY, r, 1).permutation(n))
    except NonUniqueMax as exc:
        raise NonUniqueMax(f"replicate {r} hit a tie in ||U_k|| twice: {exc}") from exc


def permutation_replicates(statistic: Callable, n, n_perm, seed, n_jobs=1):
    """Values of ``statistic(perm)`` for ``n_perm`` independent permutations of ``range(n)``.

    A replicate that raises ``NonUniqueMax`` is redrawn once from a
    dedicated stream; a second tie aborts the run.
    """
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    if n_jobs == 1:
        out = [_one_replicate(statistic, n, seed, r) for r in range(n_perm)]
    else:
        out = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_one_replicate)(statistic, n, seed, r) for r in range(n_perm)
        )
    return np.asarray(out, dtype=float)


def permutation_test(statistic: Callable, n, n_perm=100, seed=None, observed=None,
                     method="custom", config=None, n_jobs=1) -> TestOutcome:
    """Add-one permutation p-value for ``statistic``.

    ``statistic(perm)`` evaluates the statistic with the rows of ``Z`` taken
    in the order ``perm``; ``observed`` defaults to ``statistic(arange(n))``.
    """
    seed = fresh_seed() if seed is None else int(seed)
    obs = statistic(np.arange(n)) if observed is None else float(observed)
    reps = permutation_replicates(statistic, n, n_perm, seed, n_jobs)
    return TestOutcome(method, float(obs), reps, add_one_p_value(obs, reps), int(n_perm), seed, dict(config or {}))


# statistics ---------------------------------------------------------------

def ridge_statistic(Xhat, Z, refit_cv=True, seed=0, folds=10):
    """``perm -> ||B_hat||_F`` for the cross-validated ridge fit.

    The fold split and the SVDs of the training blocks are attached to the
    rows of ``Z``; a replicate instead reorders ``Xhat`` by the inverse
    permutation. Since the folds are themselves a uniform random split this
    has the same distribution as re-splitting for each replicate, at a
    fraction of the cost. ``refit_cv=False`` reuses the observed penalties.
    """
    X = np.asarray(Xhat, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    cv = RidgeCV(Z, folds=folds, rng=stream(seed, 7))
    frozen = cv.select(X)

    def stat(perm):
        Xp = X[np.argsort(perm)]
        fit = cv.fit(Xp, None if refit_cv else frozen)
        return float(np.linalg.norm(fit.coefficients))

    return stat


def glasso_statistics(Xhat, Z, seed=0, sigma2=None):
    """Observed covariance-test statistic and the replicate callable.

    The observed value uses the residual variance of a cross-validated fit;
    replicates use the pooled variance of ``Xhat``, which like ``R`` does
    not change under permutation.
    """
    X, Zc = _prep(Xhat, Z, True)
    n, d = X.shape
    R, U = gram(X, Zc)
    knots = covtest.knots_from_gram(U, R, n)
    if sigma2 is None:
        s2_obs = covtest.estimate_sigma2(X, Zc, "residual", rng=stream(seed, 7), center=False)
        s2_null = covtest.estimate_sigma2(X, Zc, "null", center=False)
    else:
        s2_obs, s2_null = sigma2
    observed = covtest.cov_test_statistic(knots, s2_obs).statistic

    def stat(perm):
        Up = Zc[perm].T @ X / n
        return covtest.cov_test_statistic(covtest.knots_from_gram(Up, R, n), s2_null).statistic

    return observed, stat


def run_test(method, Z, Xhat=None, A=None, n_perm=100, seed=None, tau=None, gamma=None,
             config=None, n_jobs=1, refit_cv=True, lasso_sigma2="pooled") -> TestOutcome:
    """Observed statistic plus permutation p-value for one of the five methods.

    ``netcca`` needs the adjacency ``A``; every other method needs ``Xhat``.
    For ``lasso`` the noise variance of every dimension is by default the
    one estimated from the group-LASSO fit of all of ``Xhat``
    (``lasso_sigma2="pooled"``); ``"column"`` refits a LASSO per dimension
    instead, which runs noticeably above nominal level when ``p > n``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if lasso_sigma2 not in ("pooled", "column"):
        raise ValueError("lasso_sigma2 must be 'pooled' or 'column'")
    seed = fresh_seed() if seed is None else int(seed)
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    config = dict(config or {})
    if method == "netcca":
        if A is None:
            raise ValueError("netcca needs the adjacency matrix")
        stat = network_cca_replicates(A, Z, tau, gamma)
        return permutation_test(stat, n, n_perm, seed, method=method, config=config, n_jobs=n_jobs)
    if Xhat is None:
        raise ValueError(f"{method} needs the embedding")
    X = np.asarray(Xhat, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    if method == "cca":
        stat = cca_replicates(X, Z, gamma)
        return permutation_test(stat, n, n_perm, seed, method=method, config=config, n_jobs=n_jobs)
    if method == "ridge":
        stat = ridge_statistic(X, Z, refit_cv=refit_cv, seed=seed)
        return permutation_test(stat, n, n_perm, seed, method=method, config=config, n_jobs=n_jobs)
    if method == "glasso":
        obs, stat = glasso_statistics(X, Z, seed)
        return permutation_test(stat, n, n_perm, seed, observed=obs, method=method, config=config,
                                n_jobs=n_jobs)

    # lasso: one d=1 test per latent dimension, sharing the permutations
    dims = []
    pooled = None
    if lasso_sigma2 == "pooled":
        pooled = (covtest.estimate_sigma2(X, Z, "residual", rng=stream(seed, 7)),
                  covtest.estimate_sigma2(X, Z, "null"))
    for k in range(X.shape[1]):
        obs, stat = glasso_statistics(X[:, k], Z, seed, pooled)
        reps = permutation_replicates(stat, n, n_perm, seed, n_jobs)
        dims.append({"dimension": k, "observed": obs, "replicates": reps,
                     "p_value": add_one_p_value(obs, reps)})
    best = min(dims, key=lambda e: e["p_value"])
    return TestOutcome("lasso", best["observed"], best["replicates"],
                       bonferroni_combine([e["p_value"] for e in dims]), int(n_perm), seed, config, dims)
