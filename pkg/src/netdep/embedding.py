"""Adjacency spectral embedding and scree-plot dimension selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidDimension, NonPositiveEigenvalue
from .graph_model import Graph


@dataclass(frozen=True)
class Embedding:
    positions: np.ndarray
    eigenvalues: np.ndarray
    full_spectrum: np.ndarray

    @property
    def d(self):
        return self.positions.shape[1]


def _adjacency(A):
    return A.adjacency if isinstance(A, Graph) else np.asarray(A, dtype=float)


def _fix_signs(V):
    # largest-magnitude entry of each eigenvector made positive; argmax picks the lowest index on ties
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def ase(A, d: int) -> Embedding:
    """Embed ``A`` as ``U_d S_d^{1/2}`` from its ``d`` algebraically largest eigenpairs.

    Raises
    ------
    NonPositiveEigenvalue
        If any retained eigenvalue is <= 0, which means ``d`` exceeds the
        number of positive eigenvalues of the observed matrix.
    """
    A = _adjacency(A)
    n = A.shape[0]
    if not 1 <= d <= n:
        raise InvalidDimension(f"embedding dimension must be in [1, {n}], got {d}")
    sym = 0.5 * (A + A.T)
    w, V = np.linalg.eigh(sym)
    w = w[::-1]
    V = V[:, ::-1]
    top = w[:d]
    if np.any(top <= 0):
        raise NonPositiveEigenvalue(
            f"eigenvalue {d} of the adjacency matrix is {top[-1]:.3g} <= 0; "
            "choose a smaller dimension"
        )
    U = _fix_signs(V[:, :d])
    return Embedding(U * np.sqrt(top), top.copy(), w.copy())


def profile_likelihood(values):
    """Two-segment Gaussian log-likelihood for each split point.

    Entry ``q - 1`` is the log-likelihood of putting the first ``q`` values
    in one group and the rest in another, with separate means and a pooled
    variance (Zhu & Ghodsi 2006).
    """
    x = np.asarray(values, dtype=float)
    N = x.size
    out = np.full(N - 1, -np.inf)
    for q in range(1, N):
        head, tail = x[:q], x[q:]
        ss = np.sum((head - head.mean()) ** 2) + np.sum((tail - tail.mean()) ** 2)
        var = ss / N
        if var <= 0:
            out[q - 1] = np.inf
            continue
        out[q - 1] = -0.5 * N * (np.log(2 * np.pi * var) + 1.0)
    return out


def select_dimension(full_spectrum, d_max: Optional[int] = None) -> int:
    """Elbow of the scree plot of eigenvalue magnitudes, capped at ``d_max``.

    A flat spectrum has no elbow and returns 1; ties go to the smallest
    dimension.
    """
    mags = np.sort(np.abs(np.asarray(full_spectrum, dtype=float)))[::-1]
    if d_max is not None and d_max <= 1:
        return 1
    if mags.size < 3 or np.ptp(mags) == 0:
        return 1
    ll = profile_likelihood(mags)
    if np.all(np.isinf(ll) & (ll > 0)):
        return 1
    d = int(np.argmax(ll)) + 1
    if d_max is not None:
        d = min(d, int(d_max))
    return d
