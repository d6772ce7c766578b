"""Fundamental solutions of the three-term recurrence and related identities.

For a base site ``m`` and spectral parameter ``z`` the solutions ``c_m`` and
``s_m`` of ``(tau u)(n) = z u(n)`` are fixed by

    c_m(z, m-1) = 1,  c_m(z, m) = 0,
    s_m(z, m-1) = 0,  s_m(z, m) = 1,

and continued in both directions by the recurrence. For fixed ``n`` each is
a polynomial in ``z``; polynomials are never expanded into coefficients,
only evaluated through the recurrence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np

from .eigensolve import EigenDecomposition, eigendecompose, eigenvalues
from .errors import RangeError
from .operator import IndexInterval, JacobiOperator, submatrix


@dataclass(frozen=True)
class SolutionPair:
    """Values of ``c_m(z, n)`` and ``s_m(z, n)`` for ``n`` in ``start..stop``.

    ``c`` and ``s`` have shape ``z.shape + (stop - start + 1,)``. Entries that
    need an off-diagonal coefficient outside the operator's data are NaN.
    """

    base: int
    z: np.ndarray
    start: int
    c: np.ndarray
    s: np.ndarray

    @property
    def stop(self) -> int:
        return self.start + self.c.shape[-1] - 1

    def _get(self, arr, n, name):
        if not self.start <= n <= self.stop:
            raise RangeError(f"{name}_{self.base}(z, {n}) outside computed range "
                             f"[{self.start}, {self.stop}]")
        val = arr[..., n - self.start]
        if np.any(np.isnan(val)):
            raise RangeError(f"{name}_{self.base}(z, {n}) needs data outside the operator")
        return val

    def c_at(self, n: int):
        return self._get(self.c, n, "c")

    def s_at(self, n: int):
        return self._get(self.s, n, "s")


def _solve(H: JacobiOperator, m: int, z, init_prev, init_cur, start, stop):
    """Run the recurrence from ``(u(m-1), u(m)) = (init_prev, init_cur)``."""
    if z.dtype == object:
        dtype = object
    else:
        dtype = complex if np.iscomplexobj(z) else float
    u = np.full(z.shape + (stop - start + 1,), np.nan, dtype=dtype)
    u[..., m - 1 - start] = init_prev
    u[..., m - start] = init_cur

    def a(n):
        return H.a[n - H.lo] if H.lo <= n <= H.hi - 1 else None

    # Row n yields u(n+1) going up and u(n-1) going down. A missing
    # coefficient is harmless only when it multiplies an exact zero of the
    # initial data; otherwise the rest of that direction stays NaN.
    for n in range(m, stop):
        prev, cur = u[..., n - 1 - start], u[..., n - start]
        ap = a(n - 1)
        if ap is None and np.any(prev != 0):
            break
        back = 0.0 if ap is None else ap * prev
        u[..., n + 1 - start] = ((z - H.omega[n - H.lo]) * cur - back) / a(n)
    for n in range(m - 1, start, -1):
        cur, nxt = u[..., n - start], u[..., n + 1 - start]
        an = a(n)
        if an is None and np.any(nxt != 0):
            break
        fwd = 0.0 if an is None else an * nxt
        u[..., n - 1 - start] = ((z - H.omega[n - H.lo]) * cur - fwd) / a(n - 1)
    return u


def fundamental_solutions(H: JacobiOperator, m: int, z, start: int | None = None,
                          stop: int | None = None) -> SolutionPair:
    """Evaluate ``c_m(z, n)`` and ``s_m(z, n)`` for ``n`` in ``start..stop``.

    Parameters
    ----------
    H : JacobiOperator
        Supplies the coefficients ``a`` and ``omega``.
    m : int
        Base site; the initial data sit at ``m-1`` and ``m``.
    z : scalar or array_like
        Spectral parameter(s); real or complex. Arrays are evaluated
        element-wise in one pass.
    start, stop : int, optional
        Index range. Defaults to the widest range computable from ``H``,
        which always contains ``m-1`` and ``m``.
    """
    z = np.asarray(z)
    if start is None:
        start = min(H.lo, m - 1)
    if stop is None:
        stop = max(H.hi, m)
    if not start <= m - 1 < stop:
        raise RangeError(f"range [{start}, {stop}] must cover sites {m - 1} and {m}")
    if start < min(H.lo, m - 1) or stop > max(H.hi, m):
        raise RangeError(f"range [{start}, {stop}] exceeds the operator data "
                         f"[{H.lo}, {H.hi}] for base {m}")
    c = _solve(H, m, z, 1.0, 0.0, start, stop)
    s = _solve(H, m, z, 0.0, 1.0, start, stop)
    return SolutionPair(m, z, start, c, s)


def _rayleigh_quotient(H: JacobiOperator, v) -> mpmath.mpf:
    v = [mpmath.mpf(float(x)) for x in v]
    num = mpmath.fsum(mpmath.mpf(float(w)) * x * x for w, x in zip(H.omega, v))
    num += 2 * mpmath.fsum(mpmath.mpf(float(a)) * v[i] * v[i + 1] for i, a in enumerate(H.a))
    return num / mpmath.fsum(x * x for x in v)


def _working_digits(H: JacobiOperator, lam) -> int:
    # |u(n+1)| <= K max(|u(n)|, |u(n-1)|) bounds the growth of a solution
    # over the whole interval; the digits lost to it are added on top of
    # double precision plus a margin.
    if H.size == 1:
        return 30
    spread = float(np.max(np.abs(lam))) + float(np.max(np.abs(H.omega))) + float(H.a.max())
    K = max(spread / float(H.a.min()), 2.0)
    return 30 + int(np.ceil(H.size * np.log10(K)))


def solutions_at_eigenvalues(H: JacobiOperator, m: int,
                             ed: EigenDecomposition | None = None) -> SolutionPair:
    """``c_m`` and ``s_m`` on the sites of ``H`` at every eigenvalue of ``H``.

    At an eigenvalue near the spectral edge of a localized eigenvector the
    polynomials have derivatives of order ``1e12`` and more, so evaluating
    them at the double-precision eigenvalue, in double precision, is
    meaningless far from the localization centre. Here each eigenvalue is
    refined by a Rayleigh quotient and the recurrence runs in extended
    precision; only the results are rounded to double. ``z`` of the returned
    pair holds the unrefined eigenvalues.
    """
    ed = eigendecompose(H) if ed is None else ed
    start, stop = min(H.lo, m - 1), max(H.hi, m)
    with mpmath.workdps(_working_digits(H, ed.eigenvalues)):
        z = np.empty(ed.size, dtype=object)
        z[:] = [_rayleigh_quotient(H, v) for v in ed.vectors.T]
        c = _solve(H, m, z, 1, 0, start, stop)
        s = _solve(H, m, z, 0, 1, start, stop)
        c, s = c.astype(float), s.astype(float)
    return SolutionPair(m, ed.eigenvalues, start, c, s)


def wronskian(H: JacobiOperator, xi, eta, n: int, start: int | None = None):
    """``W_n(xi, eta) = a(n) (xi(n) eta(n+1) - eta(n) xi(n+1))``.

    ``xi`` and ``eta`` are sequences whose first entry sits at site ``start``
    (default ``H.lo``); trailing axes beyond the last are site axes.
    """
    start = H.lo if start is None else start
    xi, eta = np.asarray(xi), np.asarray(eta)
    i = n - start
    if i < 0 or i + 1 >= xi.shape[-1] or i + 1 >= eta.shape[-1]:
        raise RangeError(f"W_{n} needs sites {n}, {n + 1} of the sequences")
    an = H.a_at(n)
    return an * (xi[..., i] * eta[..., i + 1] - eta[..., i] * xi[..., i + 1])


def tau(H: JacobiOperator, xi, k: int, start: int | None = None):
    """Interior three-term expression ``(tau xi)(k)``."""
    start = H.lo if start is None else start
    xi = np.asarray(xi)
    i = k - start
    if i < 1 or i + 1 >= xi.shape[-1]:
        raise RangeError(f"(tau xi)({k}) needs sites {k - 1}..{k + 1}")
    return (H.a_at(k - 1) * xi[..., i - 1] + H.omega_at(k) * xi[..., i]
            + H.a_at(k) * xi[..., i + 1])


def green_residual(H: JacobiOperator, xi, eta, m: int, n: int, start: int | None = None):
    """``sum_{k=m+1}^{n} (xi tau(eta) - tau(xi) eta)(k) - (W_n - W_m)``."""
    start = H.lo if start is None else start
    xi, eta = np.asarray(xi), np.asarray(eta)
    lhs = 0.0
    for k in range(m + 1, n + 1):
        i = k - start
        lhs = lhs + xi[..., i] * tau(H, eta, k, start) - tau(H, xi, k, start) * eta[..., i]
    return lhs - (wronskian(H, xi, eta, n, start) - wronskian(H, xi, eta, m, start))


def evaluate_poly_at_operator(H: JacobiOperator, poly: Callable, source: int,
                              ed: EigenDecomposition | None = None) -> np.ndarray:
    """``p(H) delta_source`` computed through the eigendecomposition.

    ``poly`` maps an array of eigenvalues to the array of polynomial values.
    """
    ed = eigendecompose(H) if ed is None else ed
    w = np.asarray(poly(ed.eigenvalues))
    return ed.vectors @ (w * ed.component(source))


def reconstruct_delta(H: JacobiOperator, n: int, branch: str, m: int | None = None,
                 ed: EigenDecomposition | None = None) -> np.ndarray:
    """Reconstruct ``delta_n`` from polynomials of ``H`` applied to basis vectors.

    ``branch`` selects the identity:

    ``"left"``
        ``s_lo(H, n) delta_lo``
    ``"right"``
        ``c_{hi+1}(H, n) delta_hi``
    ``"pair"``
        ``s_{m+1}(H, n) delta_{m+1} + c_{m+1}(H, n) delta_m`` for
        ``lo <= m <= hi-1``.
    """
    ed = eigendecompose(H) if ed is None else ed
    lam = ed.eigenvalues
    if n not in H.interval:
        raise RangeError(f"site {n} outside [{H.lo}, {H.hi}]")
    if branch == "left":
        p = fundamental_solutions(H, H.lo, lam).s_at(n)
        return ed.vectors @ (p * ed.component(H.lo))
    if branch == "right":
        p = fundamental_solutions(H, H.hi + 1, lam).c_at(n)
        return ed.vectors @ (p * ed.component(H.hi))
    if branch == "pair":
        if m is None or not H.lo <= m <= H.hi - 1:
            raise RangeError(f"pair branch needs lo <= m <= hi-1, got m={m}")
        sol = fundamental_solutions(H, m + 1, lam)
        coeff = sol.s_at(n) * ed.component(m + 1) + sol.c_at(n) * ed.component(m)
        return ed.vectors @ coeff
    raise ValueError(f"unknown branch {branch!r}")


def s_polynomial_zeros(H: JacobiOperator, m: int, n: int) -> np.ndarray:
    """Zeros of ``z -> s_m(z, n)`` for ``n >= m+1``.

    These are the eigenvalues of the restriction of ``H`` to ``m..n-1``.
    """
    if n < m + 1:
        raise RangeError(f"s_{m}(z, {n}) is only non-constant for n >= m+1")
    return eigenvalues(submatrix(H, IndexInterval(m, n - 1)))


def c_polynomial_zeros(H: JacobiOperator, m: int, n: int) -> np.ndarray:
    """Zeros of ``z -> c_m(z, n)`` for ``n <= m-2``.

    These are the eigenvalues of the restriction of ``H`` to ``n+1..m-1``.
    """
    if n > m - 2:
        raise RangeError(f"c_{m}(z, {n}) is only non-constant for n <= m-2")
    return eigenvalues(submatrix(H, IndexInterval(n + 1, m - 1)))
