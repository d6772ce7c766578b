"""Finite Jacobi operators on an integer interval.

Sites are labelled by integers ``lo..hi``. The off-diagonal sequence ``a``
lives on ``lo..hi-1`` (``a[n]`` couples sites ``n`` and ``n+1``) and the
potential ``omega`` on ``lo..hi``. Both are stored as contiguous numpy
arrays keyed by the offset from ``lo``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, NonPositiveOffDiagonal, NotContained, RangeError


@dataclass(frozen=True)
class IndexInterval:
    """Closed integer interval ``[lo, hi]`` of interior sites."""

    lo: int
    hi: int

    def __post_init__(self):
        if int(self.lo) != self.lo or int(self.hi) != self.hi:
            raise ValueError("interval endpoints must be integers")
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def __contains__(self, site) -> bool:
        return self.lo <= site <= self.hi

    def __iter__(self):
        return iter(range(self.lo, self.hi + 1))

    def __len__(self):
        return self.size

    def contains(self, other: "IndexInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


def basis_vector(interval: IndexInterval, site: int) -> np.ndarray:
    """Canonical vector delta_site on ``interval``."""
    if site not in interval:
        raise RangeError(f"site {site} outside [{interval.lo}, {interval.hi}]")
    e = np.zeros(interval.size)
    e[site - interval.lo] = 1.0
    return e


class JacobiOperator:
    """Symmetric tridiagonal operator with positive off-diagonal.

    Instances are immutable: the coefficient arrays are copied on
    construction and marked read-only.
    """

    __slots__ = ("interval", "a", "omega")

    def __init__(self, interval: IndexInterval, a, omega):
        a = np.array(a, dtype=float).reshape(-1)
        omega = np.array(omega, dtype=float).reshape(-1)
        if omega.size != interval.size:
            raise LengthMismatch(
                f"omega has {omega.size} entries, interval [{interval.lo}, {interval.hi}] "
                f"needs {interval.size}"
            )
        if a.size != interval.size - 1:
            raise LengthMismatch(
                f"a has {a.size} entries, interval [{interval.lo}, {interval.hi}] "
                f"needs {interval.size - 1}"
            )
        bad = np.flatnonzero(~(a > 0))
        if bad.size:
            n = interval.lo + int(bad[0])
            raise NonPositiveOffDiagonal(f"a({n}) = {a[bad[0]]!r} is not positive")
        if not np.all(np.isfinite(omega)):
            raise ValueError("omega must be finite")
        a.setflags(write=False)
        omega.setflags(write=False)
        object.__setattr__(self, "interval", interval)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "omega", omega)

    def __setattr__(self, name, value):
        raise AttributeError("JacobiOperator is immutable")

    def __repr__(self):
        return f"JacobiOperator(lo={self.lo}, hi={self.hi})"

    def __eq__(self, other):
        if not isinstance(other, JacobiOperator):
            return NotImplemented
        return (
            self.interval == other.interval
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.omega, other.omega)
        )

    __hash__ = None

    @property
    def lo(self) -> int:
        return self.interval.lo

    @property
    def hi(self) -> int:
        return self.interval.hi

    @property
    def size(self) -> int:
        return self.interval.size

    def a_at(self, n: int) -> float:
        if not self.lo <= n <= self.hi - 1:
            raise RangeError(f"a({n}) undefined on [{self.lo}, {self.hi}]")
        return float(self.a[n - self.lo])

    def omega_at(self, n: int) -> float:
        if n not in self.interval:
            raise RangeError(f"omega({n}) undefined on [{self.lo}, {self.hi}]")
        return float(self.omega[n - self.lo])

    def to_dense(self) -> np.ndarray:
        return np.diag(self.omega) + np.diag(self.a, 1) + np.diag(self.a, -1)

    def to_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "a": [float(x) for x in self.a],
            "omega": [float(x) for x in self.omega],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "JacobiOperator":
        missing = {"lo", "hi", "a", "omega"} - set(data)
        if missing:
            raise ValueError(f"matrix file lacks field(s): {sorted(missing)}")
        return build_operator(IndexInterval(data["lo"], data["hi"]), data["a"], data["omega"])


def build_operator(interval: IndexInterval, a, omega) -> JacobiOperator:
    """Validate ``a`` and ``omega`` against ``interval`` and build the operator.

    A scalar ``a`` is broadcast to every bond.
    """
    if np.ndim(a) == 0:
        a = np.full(interval.size - 1, float(a))
    return JacobiOperator(interval, a, omega)


def free_operator(size: int, lo: int = 1) -> JacobiOperator:
    """Zero-diagonal operator with unit off-diagonal on ``[lo, lo+size-1]``."""
    return build_operator(IndexInterval(lo, lo + size - 1), 1.0, np.zeros(size))


def apply(H: JacobiOperator, xi) -> np.ndarray:
    """Action of ``H`` on a sequence over its interval.

    Interior rows use the three-term rule; the first and last rows drop the
    term that would reach outside the interval.
    """
    xi = np.asarray(xi)
    if xi.shape != (H.size,):
        raise LengthMismatch(f"vector of shape {xi.shape} on interval of size {H.size}")
    out = H.omega * xi
    out[:-1] += H.a * xi[1:]
    out[1:] += H.a * xi[:-1]
    return out


def submatrix(H: JacobiOperator, sub: IndexInterval) -> JacobiOperator:
    """Restriction of ``H`` to the sites of ``sub``."""
    if not H.interval.contains(sub):
        raise NotContained(
            f"[{sub.lo}, {sub.hi}] is not contained in [{H.lo}, {H.hi}]"
        )
    i, j = sub.lo - H.lo, sub.hi - H.lo
    return JacobiOperator(sub, H.a[i:j], H.omega[i : j + 1])


def load_operator(path) -> JacobiOperator:
    with open(path) as fh:
        return JacobiOperator.from_dict(json.load(fh))


def save_operator(H: JacobiOperator, path) -> None:
    Path(path).write_text(json.dumps(H.to_dict()) + "\n")
