"""Continuous potential distributions and reproducible sampling.

Every draw goes through a :class:`SeededSampler`, a thin wrapper around a
counter-based Philox generator. A trial-level sampler is derived from the
pair ``(master seed, trial index)`` through ``numpy.random.SeedSequence``, so
trial streams do not depend on the order in which trials are executed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CoverageError, InvalidSpec
from .operator import IndexInterval

CANTOR_DIGITS = 34
_CANTOR_WEIGHTS = 2.0 * 3.0 ** -np.arange(1, CANTOR_DIGITS + 1)

_PARAMS = {
    "uniform": ("low", "high"),
    "gaussian": ("mean", "sd"),
    "cantor": ("scale", "shift"),
}
_DEFAULTS = {
    "uniform": {"low": 0.0, "high": 1.0},
    "gaussian": {"mean": 0.0, "sd": 1.0},
    "cantor": {"scale": 1.0, "shift": 0.0},
}


@dataclass(frozen=True)
class DistributionSpec:
    """One of the supported atomless distributions.

    ``params`` holds ``low/high`` for ``uniform``, ``mean/sd`` for
    ``gaussian`` and ``scale/shift`` for ``cantor``.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _PARAMS:
            raise InvalidSpec(
                f"unknown distribution kind {self.kind!r}; potentials must be drawn "
                f"from a continuous distribution ({', '.join(_PARAMS)})"
            )
        extra = set(self.params) - set(_PARAMS[self.kind])
        if extra:
            raise InvalidSpec(f"{self.kind} does not take {sorted(extra)}")
        params = dict(_DEFAULTS[self.kind])
        for k, v in self.params.items():
            try:
                params[k] = float(v)
            except (TypeError, ValueError):
                raise InvalidSpec(f"{self.kind}.{k} must be a number, got {v!r}") from None
            if not np.isfinite(params[k]):
                raise InvalidSpec(f"{self.kind}.{k} must be finite")
        if self.kind == "uniform" and not params["low"] < params["high"]:
            raise InvalidSpec("uniform needs low < high")
        if self.kind == "gaussian" and not params["sd"] > 0:
            raise InvalidSpec("gaussian needs sd > 0")
        if self.kind == "cantor" and params["scale"] == 0:
            raise InvalidSpec("cantor needs a non-zero scale")
        object.__setattr__(self, "params", params)

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionSpec":
        if not isinstance(data, dict) or "kind" not in data:
            raise InvalidSpec(f"distribution spec must be an object with 'kind': {data!r}")
        rest = {k: v for k, v in data.items() if k != "kind"}
        return cls(data["kind"], rest)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    def sample(self, sampler: "SeededSampler", size=None):
        p = self.params
        if self.kind == "uniform":
            return sampler.rng.uniform(p["low"], p["high"], size)
        if self.kind == "gaussian":
            return sampler.rng.normal(p["mean"], p["sd"], size)
        shape = () if size is None else np.atleast_1d(size).tolist()
        bits = sampler.rng.integers(0, 2, size=tuple(shape) + (CANTOR_DIGITS,), dtype=np.int8)
        x = bits @ _CANTOR_WEIGHTS
        return p["shift"] + p["scale"] * x


class SeededSampler:
    """Deterministic bit source for one stream of draws.

    ``spawn(i)`` returns an independent child stream that depends only on
    this sampler's seed material and ``i``.
    """

    def __init__(self, seed: int, key: tuple = ()):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise InvalidSpec(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(entropy=seed, spawn_key=self.key)
        self.rng = np.random.Generator(np.random.Philox(ss))

    def spawn(self, index: int) -> "SeededSampler":
        return SeededSampler(self.seed, self.key + (int(index),))

    def __repr__(self):
        return f"SeededSampler(seed={self.seed}, key={self.key})"


@dataclass(frozen=True)
class PotentialModel:
    """Independent per-site distributions for the potential.

    Either one shared spec (``site_specs`` is None) or an explicit list with
    one spec per site of the target interval.
    """

    shared: DistributionSpec | None = None
    site_specs: Sequence[DistributionSpec] | None = None

    def __post_init__(self):
        if (self.shared is None) == (self.site_specs is None):
            raise InvalidSpec("give exactly one of a shared spec or per-site specs")

    def specs_for(self, interval: IndexInterval) -> list[DistributionSpec]:
        if self.shared is not None:
            return [self.shared] * interval.size
        if len(self.site_specs) != interval.size:
            raise CoverageError(
                f"{len(self.site_specs)} site distributions for an interval of "
                f"{interval.size} sites"
            )
        return list(self.site_specs)

    @classmethod
    def from_config(cls, data) -> "PotentialModel":
        if isinstance(data, list):
            return cls(site_specs=tuple(DistributionSpec.from_dict(d) for d in data))
        return cls(shared=DistributionSpec.from_dict(data))

    def to_config(self):
        if self.shared is not None:
            return self.shared.to_dict()
        return [s.to_dict() for s in self.site_specs]


def sample_value(spec: DistributionSpec, sampler: SeededSampler) -> float:
    return float(spec.sample(sampler))


def sample_potential(model: PotentialModel, interval: IndexInterval,
                     sampler: SeededSampler) -> np.ndarray:
    """Independent draws, one per site of ``interval``, in site order."""
    specs = model.specs_for(interval)
    if model.shared is not None:
        return np.asarray(model.shared.sample(sampler, interval.size), dtype=float)
    return np.array([sample_value(s, sampler) for s in specs])


def cantor_cdf(x):
    """Cantor function, extended by 0 left of 0 and by 1 right of 1.

    Reads ternary digits of ``x`` until the first digit 1 (or 64 digits);
    each digit 2 contributes the current binary weight.
    """
    if np.ndim(x):
        return np.array([cantor_cdf(v) for v in np.asarray(x, dtype=float).ravel()]
                        ).reshape(np.shape(x))
    x = float(x)
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    value, weight = 0.0, 0.5
    for _ in range(64):
        x *= 3.0
        digit = int(x)
        x -= digit
        if digit == 1:
            return value + weight
        if digit == 2:
            value += weight
        weight *= 0.5
    return value
