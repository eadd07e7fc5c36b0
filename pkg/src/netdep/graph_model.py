"""Random dot product graphs and the six simulation scenarios.

Scenarios (i)-(iv) follow the linear model ``X = s Z B + E`` with Gaussian
covariates and a weighted graph ``A = X X^T + noise``; (v) pushes the linear
predictor through a Dirichlet link and samples a binary graph; (vi) reverses
the direction of dependence, deriving the first covariate from community
labels.

The coefficient matrix and covariate covariance of a scenario are drawn once
from the scenario seed and shared by every Monte Carlo replicate of that
scenario; only ``Z``, ``E`` and the edge noise are drawn per replicate.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from ._rng import stream
from .errors import (
    InvalidAlpha,
    InvalidDimension,
    InvalidSpec,
    NearSingular,
    OutOfRangeProbability,
)

PROB_TOL = 1e-12


class Scenario(str, enum.Enum):
    NoSparsity = "i"
    EntrywiseSparse = "ii"
    RowwiseSparse = "iii"
    HighCorrelation = "iv"
    Network = "v"
    AssortativeMixing = "vi"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        text = str(value).strip()
        for member in cls:
            if text == member.value or text.lower() == member.name.lower():
                return member
        raise InvalidSpec(f"unknown scenario {value!r}")

    @property
    def linear(self):
        return self in (Scenario.NoSparsity, Scenario.EntrywiseSparse,
                        Scenario.RowwiseSparse, Scenario.HighCorrelation)


@dataclass(frozen=True)
class Graph:
    adjacency: np.ndarray
    kind: str = "weighted"

    def __post_init__(self):
        if self.kind not in ("binary", "weighted"):
            raise ValueError(f"graph kind must be 'binary' or 'weighted', got {self.kind!r}")
        a = self.adjacency
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")

    @property
    def n(self):
        return self.adjacency.shape[0]


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: Scenario
    n: int
    p: int
    d: int
    s: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario.parse(self.scenario))
        if self.n < 2 or self.p < 1 or self.d < 1:
            raise InvalidSpec(f"need n >= 2, p >= 1, d >= 1 (got n={self.n}, p={self.p}, d={self.d})")
        if not (self.s >= 0 and math.isfinite(self.s)):
            raise InvalidSpec(f"signal strength s must be finite and >= 0, got {self.s}")
        if self.scenario is Scenario.AssortativeMixing and self.d != 4:
            raise InvalidSpec("scenario vi (assortative mixing) has exactly d = 4 latent dimensions")
        if self.scenario is not Scenario.AssortativeMixing and self.p < 2:
            raise InvalidSpec("scenarios i-v use an equicorrelated or AR covariance and need p >= 2")

    def to_config(self):
        return "\n".join(
            f"{k} = {v}" for k, v in (
                ("scenario", self.scenario.value), ("n", self.n), ("p", self.p),
                ("d", self.d), ("s", repr(float(self.s))), ("seed", self.seed),
            )
        ) + "\n"

    @classmethod
    def from_config(cls, text):
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidSpec(f"line {lineno}: expected 'key = value', got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
        missing = {"scenario", "n", "p", "d", "s"} - set(values)
        if missing:
            raise InvalidSpec(f"config is missing keys: {sorted(missing)}")
        try:
            return cls(
                scenario=values["scenario"], n=int(values["n"]), p=int(values["p"]),
                d=int(values["d"]), s=float(values["s"]), seed=int(values.get("seed", 0)),
            )
        except ValueError as exc:
            if isinstance(exc, InvalidSpec):
                raise
            raise InvalidSpec(str(exc)) from exc

    def with_s(self, s):
        return replace(self, s=float(s))


@dataclass(frozen=True)
class ScenarioDraw:
    graph: Graph
    covariates: np.ndarray
    latent: np.ndarray
    coefficients: np.ndarray
    groups: Optional[np.ndarray] = None
    spec: Optional[ScenarioSpec] = field(default=None, compare=False)

    @property
    def support(self):
        """Indices of covariates with a nonzero coefficient row."""
        return np.flatnonzero(np.any(self.coefficients != 0, axis=1))


def sample_rdpg_binary(X, rng):
    """Symmetric Bernoulli graph with ``P(A_ij = 1) = X_i . X_j`` and zero diagonal."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    P = X @ X.T
    iu = np.triu_indices(n, 1)
    probs = P[iu]
    bad = np.flatnonzero((probs < -PROB_TOL) | (probs > 1 + PROB_TOL) | ~np.isfinite(probs))
    if bad.size:
        k = bad[0]
        raise OutOfRangeProbability(int(iu[0][k]), int(iu[1][k]), float(probs[k]))
    probs = np.clip(probs, 0.0, 1.0)
    upper = rng.random(probs.size) < probs
    A = np.zeros((n, n))
    A[iu] = upper
    A += A.T
    return Graph(A, kind="binary")


def sample_rdpg_weighted(X, noise_sd, rng):
    """``A = X X^T + noise`` with symmetric Gaussian noise, diagonal included.

    ``noise_sd`` is a nonnegative scalar, an ``n x n`` array of entrywise
    standard deviations, or a callable mapping ``X X^T`` to either.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    P = X @ X.T
    sd = noise_sd(P) if callable(noise_sd) else noise_sd
    sd = np.asarray(sd, dtype=float)
    if not np.all(np.isfinite(sd)) or np.any(sd < 0):
        raise ValueError("noise standard deviation must be finite and nonnegative")
    iu = np.triu_indices(n)
    eps = rng.standard_normal(iu[0].size)
    if sd.ndim == 0:
        eps = eps * sd
    else:
        eps = eps * np.broadcast_to(sd, (n, n))[iu]
    noise = np.zeros((n, n))
    noise[iu] = eps
    noise = noise + np.triu(noise, 1).T
    return Graph(P + noise, kind="weighted")


def build_sigma_z(kind, p, nu=None):
    """Covariate covariance with largest eigenvalue 2.

    ``equicorrelation``: unit diagonal, off-diagonal ``1/(p-1)``.
    ``ar_decay``: ``sigma0^2 * 0.95^|i-j|`` with ``sigma0^2`` set so the
    largest eigenvalue is exactly 2.
    """
    if kind == "equicorrelation":
        if p < 2:
            raise InvalidDimension("equicorrelation needs p >= 2 (off-diagonal 1/(p-1))")
        rho = 1.0 / (p - 1)
        S = np.full((p, p), rho)
        np.fill_diagonal(S, 1.0)
        if 1.0 - rho <= 1e-12:
            warnings.warn(f"equicorrelation matrix with p={p} is singular", NearSingular, stacklevel=2)
        return S
    if kind == "ar_decay":
        if p < 1:
            raise InvalidDimension("p must be >= 1")
        nu = 0.95 if nu is None else nu
        idx = np.arange(p)
        T = nu ** np.abs(idx[:, None] - idx[None, :])
        top = np.linalg.eigvalsh(T)[-1]
        return (2.0 / top) * T
    raise ValueError(f"unknown covariance kind {kind!r}")


def sample_dirichlet(alpha, rng):
    """Dirichlet draw(s) for a positive vector or a matrix of row parameters.

    Gamma variates are drawn on the log scale (``log G_a = log G_{a+1} +
    log(U)/a``) so that tiny concentration parameters cannot underflow every
    coordinate to zero.
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(alpha)) or np.any(alpha <= 0):
        raise InvalidAlpha("Dirichlet parameters must be finite and > 0")
    log_g = np.log(rng.standard_gamma(alpha + 1.0)) + np.log(rng.random(alpha.shape)) / alpha
    out = np.exp(log_g - logsumexp(log_g, axis=-1, keepdims=True))
    return out / out.sum(axis=-1, keepdims=True)


def entrywise_count(n, d):
    return int(math.floor(d * math.log(n) / 2))


def rowwise_count(n):
    return int(math.floor(math.log(n) / 2))


@dataclass(frozen=True)
class ScenarioParameters:
    coefficients: np.ndarray
    sigma_z: Optional[np.ndarray]
    z_factor: Optional[np.ndarray]


def _unit_columns(B):
    norms = np.linalg.norm(B, axis=0)
    scale = np.where(norms > 0, norms, 1.0)
    return B / scale


def _factor(S):
    w, V = np.linalg.eigh(S)
    return V * np.sqrt(np.clip(w, 0.0, None))


@lru_cache(maxsize=64)
def scenario_parameters(spec: ScenarioSpec) -> ScenarioParameters:
    """Coefficients and covariate covariance frozen by the scenario seed."""
    rng = stream(spec.seed, 0)
    sc, n, p, d = spec.scenario, spec.n, spec.p, spec.d
    if sc is Scenario.AssortativeMixing:
        return ScenarioParameters(np.zeros((p, d)), None, None)
    if sc is Scenario.NoSparsity:
        k = np.arange(1, p + 1)[:, None]
        B = rng.normal(1.0 / k, 1.0 / (3.0 * k), size=(p, d))
    elif sc is Scenario.EntrywiseSparse:
        B = np.zeros(p * d)
        picked = rng.choice(p * d, size=min(entrywise_count(n, d), p * d), replace=False)
        B[picked] = rng.standard_normal(picked.size)
        B = B.reshape(p, d)
    else:
        B = np.zeros((p, d))
        rows = rng.choice(p, size=min(rowwise_count(n), p), replace=False)
        B[rows] = rng.standard_normal((rows.size, d))
    B = _unit_columns(B)
    kind = "ar_decay" if sc is Scenario.HighCorrelation else "equicorrelation"
    S = build_sigma_z(kind, p)
    for arr in (B, S):
        arr.flags.writeable = False
    F = _factor(S)
    F.flags.writeable = False
    return ScenarioParameters(B, S, F)


def generate_scenario(spec: ScenarioSpec, rng: Union[np.random.Generator, int, None] = None) -> ScenarioDraw:
    """Draw covariates, latent positions and a graph for one replicate.

    ``rng`` drives the per-replicate randomness; when omitted it is derived
    from the scenario seed, so ``generate_scenario(spec)`` is reproducible.
    """
    if rng is None:
        rng = stream(spec.seed, 1)
    elif not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    params = scenario_parameters(spec)
    sc, n, p, d, s = spec.scenario, spec.n, spec.p, spec.d, spec.s
    B = params.coefficients.copy()

    if sc is Scenario.AssortativeMixing:
        groups = rng.integers(1, 5, size=n)
        alpha = np.ones((n, 4))
        alpha[np.arange(n), groups - 1] = 100.0
        X = sample_dirichlet(alpha, rng)
        graph = sample_rdpg_binary(X, rng)
        Z = rng.normal(0.0, math.sqrt(2.5), size=(n, p))
        Z[:, 0] = s * (groups - 2.5) + rng.normal(0.0, math.sqrt(1.25), size=n)
        return ScenarioDraw(graph, Z, X, B, groups, spec)

    Z = rng.standard_normal((n, p)) @ params.z_factor.T
    E = rng.normal(0.0, math.sqrt(2.0), size=(n, d))
    if sc is Scenario.Network:
        alpha = np.exp(s * (Z @ B) + E)
        X = sample_dirichlet(alpha, rng)
        assert np.all(X >= 0) and np.allclose(X.sum(axis=1), 1.0)
        graph = sample_rdpg_binary(X, rng)
    else:
        X = s * (Z @ B) + E
        graph = sample_rdpg_weighted(X, (s * s + 1.0), rng)
    return ScenarioDraw(graph, Z, X, B, None, spec)
