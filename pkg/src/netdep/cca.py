"""Canonical correlation between node-level blocks.

``rho`` is the largest singular value of the whitened cross-covariance

    (S_X + gamma I)^{-1/2} S_XZ (S_Z + gamma I)^{-1/2}

where ``S`` are sample covariances with divisor ``n``. The network version
puts the rows of the adjacency matrix in place of ``X`` and ridges its
``n x n`` covariance by ``tau``; it is evaluated through one SVD of the
column-centered adjacency so no ``n x n`` inverse root is ever formed.

Permuting the rows of ``Z`` leaves every covariance block except the cross
block unchanged, so the ``*_replicates`` helpers whiten once and reuse it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NotPositiveDefinite, SingularCovariance
from .graph_model import Graph

COND_MAX = 1e12


@dataclass(frozen=True)
class CovarianceBlocks:
    sigma_x: np.ndarray
    sigma_z: np.ndarray
    sigma_xz: np.ndarray
    n: int

    def assembled(self):
        return np.block([[self.sigma_x, self.sigma_xz], [self.sigma_xz.T, self.sigma_z]])


@dataclass(frozen=True)
class CcaResult:
    rho: float
    direction_u: np.ndarray
    direction_v: np.ndarray
    regularization: tuple


def _centered(M):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    return M - M.mean(axis=0)


def covariance_blocks(X, Z) -> CovarianceBlocks:
    Xc, Zc = _centered(X), _centered(Z)
    n = Xc.shape[0]
    if n < 2:
        raise ValueError("need at least two rows")
    if Zc.shape[0] != n:
        raise ValueError(f"row mismatch: {n} vs {Zc.shape[0]}")
    sx = Xc.T @ Xc / n
    sz = Zc.T @ Zc / n
    return CovarianceBlocks(0.5 * (sx + sx.T), 0.5 * (sz + sz.T), Xc.T @ Zc / n, n)


def inv_sqrt_psd(M, ridge=0.0, mode="strict"):
    """``(M + ridge I)^{-1/2}`` for symmetric PSD ``M``.

    ``pseudo`` maps eigenvalues at or below ``1e-10`` times the largest to
    zero instead of failing.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    w, V = np.linalg.eigh(0.5 * (M + M.T) + ridge * np.eye(M.shape[0]))
    if mode == "strict":
        if w.size and w[0] <= 1e-12:
            raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3g} is not positive")
        inv = 1.0 / np.sqrt(w)
    elif mode == "pseudo":
        cut = 1e-10 * max(float(w[-1]), 0.0) if w.size else 0.0
        keep = w > cut
        inv = np.zeros_like(w)
        inv[keep] = 1.0 / np.sqrt(w[keep])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return (V * inv) @ V.T


def default_gamma(Z, n=None):
    """Zero when ``p < n/2``, otherwise ``1e-3`` times the mean covariate variance."""
    Zc = _centered(Z)
    n = Zc.shape[0] if n is None else n
    p = Zc.shape[1]
    if p < n / 2:
        return 0.0
    return 1e-3 * float(np.sum(Zc * Zc) / n) / p


def _whitener(S, gamma, label):
    if gamma == 0:
        w = np.linalg.eigvalsh(S)
        if w[0] <= 0 or w[-1] / w[0] > COND_MAX:
            raise SingularCovariance(
                f"{label} covariance is rank deficient (condition number "
                f"{(w[-1] / w[0]) if w[0] > 0 else math.inf:.3g}); pass gamma > 0"
            )
    return inv_sqrt_psd(S, gamma, "strict")


def _top_pair(C, Wl, Wr):
    U, s, Vt = np.linalg.svd(C, full_matrices=False)
    u = Wl @ U[:, 0] if Wl is not None else U[:, 0]
    v = Wr @ Vt[0]
    return float(s[0]), u / np.linalg.norm(u), v / np.linalg.norm(v)


def cca_coefficient(Xhat, Z, gamma: Optional[float] = None) -> CcaResult:
    """First canonical correlation between the columns of ``Xhat`` and ``Z``."""
    b = covariance_blocks(Xhat, Z)
    g = default_gamma(Z) if gamma is None else float(gamma)
    if g < 0:
        raise ValueError("gamma must be >= 0")
    Wx = _whitener(b.sigma_x, g, "latent-position")
    Wz = _whitener(b.sigma_z, g, "covariate")
    rho, u, v = _top_pair(Wx @ b.sigma_xz @ Wz, Wx, Wz)
    return CcaResult(min(rho, 1.0) if g == 0 else rho, u, v, ("ridge", g) if g > 0 else ("none",))


class _NetworkFactor:
    """``(R^2 + tau)^{-1/2} R V^T / sqrt(n)`` from the SVD ``A M / sqrt(n) = W R V^T``.

    Depends on the adjacency only; shared read-only across replicates.
    """

    def __init__(self, A, tau):
        A = A.adjacency if isinstance(A, Graph) else np.asarray(A, dtype=float)
        n = A.shape[0]
        D = (A - A.mean(axis=0)) / math.sqrt(n)
        W, r, Vt = np.linalg.svd(D.T, full_matrices=False)
        # D.T = A M / sqrt(n) for symmetric A
        keep = r > r[0] * 1e-14 if r.size and r[0] > 0 else np.zeros(r.size, bool)
        self.W = W[:, keep]
        self.left = (r[keep] / np.sqrt(r[keep] ** 2 + tau))[:, None] * Vt[keep] / math.sqrt(n)
        self.tau = tau
        self.n = n


def network_cca_coefficient(A, Z, tau: Optional[float] = None,
                            gamma_z: Optional[float] = None) -> CcaResult:
    """Regularized CCA between the adjacency rows and the covariates.

    ``tau`` defaults to ``sqrt(n)``.
    """
    Aa = A.adjacency if isinstance(A, Graph) else np.asarray(A, dtype=float)
    n = Aa.shape[0]
    tau = math.sqrt(n) if tau is None else float(tau)
    if not tau > 0:
        raise ValueError("tau must be > 0")
    g = default_gamma(Z) if gamma_z is None else float(gamma_z)
    F = _NetworkFactor(Aa, tau)
    Zc = _centered(Z)
    Wz = _whitener(Zc.T @ Zc / n, g, "covariate")
    C = F.left @ Zc @ Wz
    if C.shape[0] == 0:
        return CcaResult(0.0, np.zeros(n), np.zeros(Zc.shape[1]), ("network", tau, g))
    U, s, Vt = np.linalg.svd(C, full_matrices=False)
    u = F.W @ U[:, 0]
    v = Wz @ Vt[0]
    return CcaResult(float(s[0]), u / np.linalg.norm(u), v / np.linalg.norm(v), ("network", tau, g))


def cca_replicates(Xhat, Z, gamma: Optional[float] = None):
    """Callable ``perm -> rho`` with ``Z`` rows reordered by ``perm``."""
    Xc, Zc = _centered(Xhat), _centered(Z)
    n = Xc.shape[0]
    g = default_gamma(Z) if gamma is None else float(gamma)
    Wx = _whitener(Xc.T @ Xc / n, g, "latent-position")
    Wz = _whitener(Zc.T @ Zc / n, g, "covariate")
    left = Wx @ Xc.T / n
    right = Zc @ Wz

    def rho(perm=None):
        Zp = right if perm is None else right[perm]
        return float(np.linalg.norm(left @ Zp, 2))

    return rho


def network_cca_replicates(A, Z, tau: Optional[float] = None, gamma_z: Optional[float] = None):
    Aa = A.adjacency if isinstance(A, Graph) else np.asarray(A, dtype=float)
    n = Aa.shape[0]
    tau = math.sqrt(n) if tau is None else float(tau)
    g = default_gamma(Z) if gamma_z is None else float(gamma_z)
    F = _NetworkFactor(Aa, tau)
    Zc = _centered(Z)
    right = Zc @ _whitener(Zc.T @ Zc / n, g, "covariate")

    def rho(perm=None):
        Zp = right if perm is None else right[perm]
        return float(np.linalg.norm(F.left @ Zp, 2)) if F.left.size else 0.0

    return rho
