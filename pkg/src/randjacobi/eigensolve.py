"""Eigendecomposition of finite Jacobi matrices.

The heavy lifting is done by LAPACK's MRRR tridiagonal
solver (``scipy.linalg.eigh_tridiagonal`` with the ``stemr`` driver). This
module fixes the output conventions: ascending eigenvalues, orthonormal
eigenvectors with a deterministic sign, and a re-orthogonalization pass over
numerically clustered eigenvalues.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import ConvergenceFailure
from .operator import IndexInterval, JacobiOperator

# Gap (relative to the operator norm) below which eigenvectors are
# re-orthogonalized as a block.
CLUSTER_GAP = 1e-14

# Components smaller than this are treated as zero by the sign rule.
SIGN_THRESHOLD = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a finite Jacobi operator.

    ``vectors[:, j]`` is the eigenvector for ``eigenvalues[j]``; row ``i``
    corresponds to site ``interval.lo + i``.
    """

    interval: IndexInterval
    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def norm(self) -> float:
        """Spectral norm of the decomposed operator."""
        return float(np.max(np.abs(self.eigenvalues)))

    def component(self, site: int) -> np.ndarray:
        """Values ``v_j(site)`` for every eigenvector ``j``."""
        return self.vectors[site - self.interval.lo]

    def project(self, phi, lo: float = -np.inf, hi: float = np.inf) -> np.ndarray:
        """Spectral projection of ``phi`` onto eigenvalues in ``[lo, hi]``."""
        phi = np.asarray(phi)
        keep = (self.eigenvalues >= lo) & (self.eigenvalues <= hi)
        V = self.vectors[:, keep]
        return V @ (V.T @ phi)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "vectors": [[float(x) for x in v] for v in self.vectors.T],
        }


def _fix_signs(V: np.ndarray) -> np.ndarray:
    big = np.abs(V) > SIGN_THRESHOLD
    first = np.argmax(big, axis=0)
    signs = np.sign(V[first, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _reorthogonalize(w: np.ndarray, V: np.ndarray) -> np.ndarray:
    scale = max(float(np.max(np.abs(w))), 1.0)
    close = np.diff(w) < CLUSTER_GAP * scale
    if not close.any():
        return V
    V = V.copy()
    start = 0
    for j in range(1, w.size + 1):
        if j == w.size or not close[j - 1]:
            if j - start > 1:
                q, r = np.linalg.qr(V[:, start:j])
                V[:, start:j] = q * np.sign(np.diag(r))
            start = j
    return V


def eigendecompose(H: JacobiOperator) -> EigenDecomposition:
    """All eigenpairs of ``H`` in ascending order."""
    if H.size == 1:
        w = np.array([H.omega[0]])
        V = np.ones((1, 1))
    else:
        try:
            w, V = eigh_tridiagonal(H.omega, H.a, lapack_driver="stemr")
        except LinAlgError as exc:
            raise ConvergenceFailure(str(exc)) from exc
        order = np.argsort(w, kind="stable")
        w, V = w[order], V[:, order]
        V = _reorthogonalize(w, V)
        V = _fix_signs(V)
    w.setflags(write=False)
    V.setflags(write=False)
    return EigenDecomposition(H.interval, w, V)


def eigenvalues(H: JacobiOperator) -> np.ndarray:
    """Eigenvalues only, ascending."""
    if H.size == 1:
        return np.array([H.omega[0]])
    try:
        w = eigh_tridiagonal(H.omega, H.a, eigvals_only=True, lapack_driver="stemr")
    except LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return np.sort(w)


def sturm_count(H: JacobiOperator, x: float) -> int:
    """Number of eigenvalues of ``H`` strictly below ``x``.

    Counts negative pivots of the LDL^T factorization of ``H - x``. An exact
    zero pivot before the last row is nudged to a tiny positive value, which
    keeps the count of eigenvalues strictly below ``x`` unchanged.
    """
    tiny = np.finfo(float).tiny
    count = 0
    d = H.omega[0] - x
    for k in range(1, H.size):
        if d < 0:
            count += 1
        elif d == 0:
            d = tiny
        d = (H.omega[k] - x) - H.a[k - 1] ** 2 / d
    if d < 0:
        count += 1
    return count


def residuals(H: JacobiOperator, ed: EigenDecomposition) -> tuple[float, float]:
    """Max eigenpair residual ``||Hv - lv||`` and max ``|V^T V - I|`` entry."""
    V = ed.vectors
    HV = H.omega[:, None] * V
    HV[:-1] += H.a[:, None] * V[1:]
    HV[1:] += H.a[:, None] * V[:-1]
    res = np.linalg.norm(HV - V * ed.eigenvalues, axis=0).max()
    orth = np.abs(V.T @ V - np.eye(ed.size)).max()
    return float(res), float(orth)


def dump_decomposition(ed: EigenDecomposition, path) -> None:
    Path(path).write_text(json.dumps(ed.to_dict()) + "\n")
