"""Atomic spectral measures of finite Jacobi operators.

A finite operator has pure point spectrum, so every measure here is a list
of atoms at the eigenvalues. Atoms with (numerically) zero weight are kept
so that a failed equivalence check can name the offending location.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .eigensolve import EigenDecomposition
from .errors import LengthMismatch, NullAtom, RangeError, ZeroVector
from .operator import JacobiOperator
from .polynomials import fundamental_solutions, solutions_at_eigenvalues

# Weight below which an atom counts as null. Weights are squared eigenvector
# components, so this is the square of a 1e-12 component error floor.
TOL_ATOM = 1e-24
TOL_MATCH_REL = 1e-8


def _write_csv(dest, header, rows):
    if hasattr(dest, "write"):
        writer = csv.writer(dest, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    with open(dest, "w", newline="") as fh:
        _write_csv(fh, header, rows)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely many atoms ``(locations[i], weights[i])``, locations ascending."""

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if loc.shape != w.shape:
            raise LengthMismatch("locations and weights differ in length")
        # equal neighbours are tolerated: floating point can merge two
        # theoretically distinct eigenvalues
        if np.any(np.diff(loc) < 0):
            raise ValueError("atom locations must be increasing")
        if np.any(w < 0):
            raise ValueError("atom weights must be non-negative")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.locations.size

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def diameter(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(self.locations[-1] - self.locations[0])

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        if np.array_equal(self.locations, other.locations):
            return AtomicMeasure(self.locations, self.weights + other.weights)
        loc = np.union1d(self.locations, other.locations)
        w = np.zeros(loc.size)
        w[np.searchsorted(loc, self.locations)] += self.weights
        w[np.searchsorted(loc, other.locations)] += other.weights
        return AtomicMeasure(loc, w)

    def mass_at(self, x: float, tol: float | None = None) -> float:
        """Weight of the atom nearest ``x`` if it lies within ``tol``, else 0."""
        return self.mass_near([x], tol)

    def mass_near(self, targets, tol: float | None = None) -> float:
        """Measure of the union of points in ``targets``, matched within ``tol``.

        Each atom is counted at most once however many targets it matches.
        """
        targets = np.asarray(targets, dtype=float).reshape(-1)
        if targets.size == 0 or len(self) == 0:
            return 0.0
        tol = match_tolerance(self) if tol is None else tol
        dist = np.abs(self.locations[:, None] - targets[None, :]).min(axis=1)
        return float(self.weights[dist <= tol].sum())

    def support(self, tol_atom: float = TOL_ATOM) -> np.ndarray:
        return self.locations[self.weights > tol_atom]

    def with_density(self, f) -> "AtomicMeasure":
        """The measure ``gamma(D) = integral over D of f d(self)``, for ``f >= 0``."""
        f = np.asarray(f, dtype=float)
        if f.shape != self.weights.shape:
            raise LengthMismatch("density must give one value per atom")
        if np.any(f < 0):
            raise ValueError("density must be non-negative")
        return AtomicMeasure(self.locations, f * self.weights)

    def to_csv(self, dest) -> None:
        """Write ``location,weight`` rows to a path or an open text file."""
        rows = [[repr(float(x)), repr(float(w))] for x, w in zip(self.locations, self.weights)]
        _write_csv(dest, ["location", "weight"], rows)


@dataclass(frozen=True)
class MatrixMeasure:
    """2x2 matrix-valued atomic measure built from sites ``m`` and ``m+1``."""

    m: int
    locations: np.ndarray
    matrices: np.ndarray  # shape (K, 2, 2)

    def to_csv(self, dest) -> None:
        rows = [[repr(float(v)) for v in (x, M[0, 0], M[0, 1], M[1, 1])]
                for x, M in zip(self.locations, self.matrices)]
        _write_csv(dest, ["location", "m11", "m12", "m22"], rows)


@dataclass(frozen=True)
class RNMatrix:
    """Density ``[[a, b], [b, 1 - a]]`` of a matrix measure at one atom."""

    location: float
    a: float
    b: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, 1.0 - self.a]])

    @property
    def factor(self) -> np.ndarray:
        """Vector ``u`` with ``u u^T`` equal to :attr:`matrix` (the density has rank 1)."""
        return _rank_one_factor(self.a, self.b)


def _rank_one_factor(a, b):
    a = np.clip(a, 0.0, 1.0)
    return np.stack([np.sqrt(a), np.where(b < 0, -1.0, 1.0) * np.sqrt(1.0 - a)], axis=-1)


def match_tolerance(*measures: AtomicMeasure) -> float:
    """Default location tolerance: a relative fraction of the spectral diameter."""
    locs = [m.locations for m in measures if len(m)]
    if not locs:
        return 0.0
    allloc = np.concatenate(locs)
    spread = float(allloc.max() - allloc.min())
    if spread == 0.0:
        spread = max(float(np.abs(allloc).max()), 1.0)
    return TOL_MATCH_REL * spread


def spectral_measure(ed: EigenDecomposition, phi) -> AtomicMeasure:
    """Measure with weight ``<v_j, phi>^2`` at every eigenvalue ``l_j``."""
    phi = np.asarray(phi)
    if phi.shape != (ed.size,):
        raise LengthMismatch(f"vector of shape {phi.shape}, expected ({ed.size},)")
    if not np.any(phi):
        raise ZeroVector("spectral measure of the zero vector is undefined")
    return AtomicMeasure(ed.eigenvalues, np.abs(ed.vectors.T @ phi) ** 2)


def site_measure(ed: EigenDecomposition, site: int) -> AtomicMeasure:
    """Spectral measure of the canonical basis vector at ``site``."""
    if site not in ed.interval:
        raise RangeError(f"site {site} outside [{ed.interval.lo}, {ed.interval.hi}]")
    return AtomicMeasure(ed.eigenvalues, ed.component(site) ** 2)


@dataclass(frozen=True)
class RelationReport:
    """Per-atom residuals of the measure relations for one site.

    ``s_residuals[j] = |mu_n({l_j}) - s_lo(l_j, n)^2 mu_lo({l_j})|`` and
    ``c_residuals[j]`` the mirror quantity with ``c_{hi+1}`` and ``mu_hi``.
    """

    site: int
    locations: np.ndarray
    s_residuals: np.ndarray
    c_residuals: np.ndarray

    @property
    def max_s(self) -> float:
        return float(self.s_residuals.max())

    @property
    def max_c(self) -> float:
        return float(self.c_residuals.max())

    @property
    def max_residual(self) -> float:
        return max(self.max_s, self.max_c)


def check_semiinfinite_relation(ed: EigenDecomposition, H: JacobiOperator,
                                n: int) -> RelationReport:
    """Compare ``mu_n`` with ``mu_lo`` and ``mu_hi`` reweighted by squared polynomials.

    The polynomials are evaluated at the eigenvalues in extended precision
    (see :func:`~randjacobi.polynomials.solutions_at_eigenvalues`).
    """
    if n not in H.interval:
        raise RangeError(f"site {n} outside [{H.lo}, {H.hi}]")
    return relation_reports(ed, H, sites=[n])[0]


def relation_reports(ed: EigenDecomposition, H: JacobiOperator,
                     sites=None) -> list[RelationReport]:
    """:func:`check_semiinfinite_relation` for several sites (default: all)."""
    sites = list(H.interval) if sites is None else list(sites)
    lam = ed.eigenvalues
    left = solutions_at_eigenvalues(H, H.lo, ed)
    right = solutions_at_eigenvalues(H, H.hi + 1, ed)
    mu_lo, mu_hi = ed.component(H.lo) ** 2, ed.component(H.hi) ** 2
    out = []
    for n in sites:
        mu_n = ed.component(n) ** 2
        s_res = np.abs(mu_n - left.s_at(n) ** 2 * mu_lo)
        c_res = np.abs(mu_n - right.c_at(n) ** 2 * mu_hi)
        out.append(RelationReport(n, lam, s_res, c_res))
    return out


def matrix_measure(ed: EigenDecomposition, m: int) -> MatrixMeasure:
    """Atoms ``(v_j(m), v_j(m+1))^T (v_j(m), v_j(m+1))`` at each eigenvalue."""
    if m not in ed.interval or m + 1 not in ed.interval:
        raise RangeError(f"matrix measure needs sites {m} and {m + 1} in "
                         f"[{ed.interval.lo}, {ed.interval.hi}]")
    p = np.stack([ed.component(m), ed.component(m + 1)], axis=1)
    return MatrixMeasure(m, ed.eigenvalues, p[:, :, None] * p[:, None, :])


def rn_matrix(mm: MatrixMeasure, location: float, tol_atom: float = TOL_ATOM,
              tol_match: float | None = None) -> RNMatrix:
    """Normalize the atom of ``mm`` at ``location`` to unit trace."""
    if tol_match is None:
        spread = float(np.ptp(mm.locations)) if mm.locations.size else 0.0
        tol_match = TOL_MATCH_REL * (spread or max(abs(location), 1.0))
    j = int(np.argmin(np.abs(mm.locations - location)))
    if abs(mm.locations[j] - location) > tol_match:
        raise NullAtom(f"no atom at {location!r}")
    M = mm.matrices[j]
    tr = M[0, 0] + M[1, 1]
    if tr <= tol_atom:
        raise NullAtom(f"mu_{mm.m} + mu_{mm.m + 1} has no mass at {location!r}")
    return RNMatrix(float(mm.locations[j]), float(M[0, 0] / tr), float(M[0, 1] / tr))


def rn_matrices(mm: MatrixMeasure, tol_atom: float = TOL_ATOM) -> list[RNMatrix]:
    """Densities at every atom carrying mass above ``tol_atom``."""
    out = []
    for x, M in zip(mm.locations, mm.matrices):
        tr = M[0, 0] + M[1, 1]
        if tr > tol_atom:
            out.append(RNMatrix(float(x), float(M[0, 0] / tr), float(M[0, 1] / tr)))
    return out


def g_factor(H: JacobiOperator, m: int, n: int, rn: RNMatrix) -> float:
    """``<R_m(l) p, p>`` with ``p = (c_{m+1}(l, n), s_{m+1}(l, n))``.

    Multiplying by ``(mu_m + mu_{m+1})({l})`` gives ``mu_n({l})``.

    The form is evaluated as ``(p . u)^2`` with ``R = u u^T``. Far from ``m``
    the entries of ``p`` are large while ``g`` can be tiny, and expanding the
    quadratic form term by term loses all accuracy (and even the sign).
    """
    sol = fundamental_solutions(H, m + 1, rn.location)
    p = np.array([sol.c_at(n), sol.s_at(n)], dtype=float)
    return float(p @ rn.factor) ** 2


def absolutely_continuous(mu: AtomicMeasure, nu: AtomicMeasure,
                          tol_atom: float = TOL_ATOM,
                          tol_match: float | None = None) -> bool:
    """Whether ``mu`` is absolutely continuous with respect to ``nu``.

    Every atom of ``mu`` heavier than ``tol_atom`` must sit within
    ``tol_match`` of an atom of ``nu`` heavier than ``tol_atom``.
    """
    return not _unmatched(mu, nu, tol_atom, tol_match).size


def _unmatched(mu, nu, tol_atom, tol_match):
    heavy = mu.support(tol_atom)
    if heavy.size == 0:
        return heavy
    target = nu.support(tol_atom)
    if target.size == 0:
        return heavy
    tol = match_tolerance(mu, nu) if tol_match is None else tol_match
    dist = np.abs(heavy[:, None] - target[None, :]).min(axis=1)
    return heavy[dist > tol]


def equivalent(mu: AtomicMeasure, nu: AtomicMeasure, tol_atom: float = TOL_ATOM,
               tol_match: float | None = None) -> bool:
    """Mutual absolute continuity."""
    return (absolutely_continuous(mu, nu, tol_atom, tol_match)
            and absolutely_continuous(nu, mu, tol_atom, tol_match))


def equivalence_failures(mu: AtomicMeasure, nu: AtomicMeasure,
                         tol_atom: float = TOL_ATOM,
                         tol_match: float | None = None) -> np.ndarray:
    """Atom locations carried by exactly one of the two measures."""
    return np.union1d(_unmatched(mu, nu, tol_atom, tol_match),
                      _unmatched(nu, mu, tol_atom, tol_match))


def load_measure_csv(path) -> AtomicMeasure:
    rows = list(csv.DictReader(Path(path).read_text().splitlines()))
    return AtomicMeasure([float(r["location"]) for r in rows],
                         [float(r["weight"]) for r in rows])


def g_factors(H: JacobiOperator, ed: EigenDecomposition, m: int, n: int,
              tol_atom: float = TOL_ATOM) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``g_(m,n)`` at every eigenvalue together with the trace weights.

    Returns ``(g, w)`` where ``w = (mu_m + mu_{m+1})({l_j})``; ``g`` is NaN where
    ``w <= tol_atom``.
    """
    mm = matrix_measure(ed, m)
    tr = mm.matrices[:, 0, 0] + mm.matrices[:, 1, 1]
    sol = fundamental_solutions(H, m + 1, ed.eigenvalues)
    p = np.stack([sol.c_at(n), sol.s_at(n)], axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = _rank_one_factor(mm.matrices[:, 0, 0] / tr, mm.matrices[:, 0, 1])
        g = np.einsum("ki,ki->k", p, u) ** 2
    g[tr <= tol_atom] = np.nan
    return g, tr


def g_identity_residual(H: JacobiOperator, ed: EigenDecomposition, m: int, n: int,
                        tol_atom: float = TOL_ATOM) -> float:
    """Max over atoms of ``|mu_n({l}) - g_(m,n)(l) (mu_m + mu_{m+1})({l})|``."""
    g, tr = g_factors(H, ed, m, n, tol_atom)
    keep = ~np.isnan(g)
    mu_n = ed.component(n) ** 2
    res = np.abs(mu_n[keep] - g[keep] * tr[keep])
    return float(res.max()) if res.size else 0.0
