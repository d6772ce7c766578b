"""Seeded Monte Carlo harnesses for the almost-sure spectral statements.

Each harness samples ``trials`` independent potentials, checks a property of
the resulting finite operator and folds the per-trial outcomes, in trial
order, into a JSON-serializable report. Trial ``t`` draws from the sampler
``SeededSampler(seed).spawn(t)``, so serial and parallel runs agree exactly.

"Almost surely" becomes "no failure in ``trials`` draws", and the reports
carry quantiles of the relevant gap or weight so that near misses show up.
"""

from __future__ import annotations

import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .eigensolve import eigendecompose, eigenvalues, residuals
from .errors import ConfigError, CoverageError, InvalidSpec, NonPositiveOffDiagonal
from .measures import (
    TOL_ATOM,
    equivalence_failures,
    equivalent,
    g_identity_residual,
    relation_reports,
    site_measure,
    spectral_measure,
)
from .operator import IndexInterval, JacobiOperator, basis_vector, build_operator, free_operator, submatrix
from .polynomials import fundamental_solutions, s_polynomial_zeros
from .randomness import PotentialModel, SeededSampler, sample_potential

KINDS = ("collision", "equivalence", "sum_equivalence", "atom_probability",
         "counterexample", "carleman")
RANDOM_KINDS = ("collision", "equivalence", "sum_equivalence", "atom_probability")
SELECTORS = ("fixed", "submatrix", "s_zeros")

_FIELDS = {"kind", "N", "lo", "sub_lo", "sub_hi", "sites", "pairs", "quads",
           "distribution", "trials", "seed", "eps_collision", "tol_atom",
           "tol_match", "hopping", "selector", "targets", "phi_site", "rule"}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    N: int
    distribution: PotentialModel | None = None
    trials: int = 1
    seed: int = 0
    lo: int | None = None
    sub_lo: int | None = None
    sub_hi: int | None = None
    sites: tuple | None = None
    pairs: tuple | None = None
    quads: tuple | None = None
    eps_collision: float = 1e-9
    tol_atom: float = TOL_ATOM
    tol_match: float | None = None
    hopping: float = 1.0
    selector: str | None = None
    targets: tuple | None = None
    phi_site: int | None = None
    rule: dict | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.kind in RANDOM_KINDS:
            if self.N < 3:
                raise ConfigError(f"{self.kind} experiments need at least three sites (N >= 3)")
            if self.distribution is None:
                raise ConfigError(f"{self.kind} needs a potential distribution")
            try:
                self.distribution.specs_for(self.interval)
            except (InvalidSpec, CoverageError) as exc:
                raise ConfigError(str(exc)) from exc
        elif self.N < 1:
            raise ConfigError("N must be positive")
        if not self.hopping > 0:
            raise ConfigError("hopping must be positive")
        if self.eps_collision < 0 or self.tol_atom < 0 or (self.tol_match or 0) < 0:
            raise ConfigError("tolerances must be non-negative")
        for s in self.all_sites():
            if s not in self.interval:
                raise ConfigError(f"site {s} outside [{self.interval.lo}, {self.interval.hi}]")

    @property
    def interval(self) -> IndexInterval:
        if self.lo is not None:
            return IndexInterval(self.lo, self.lo + self.N - 1)
        if self.kind == "sum_equivalence":
            return IndexInterval(-self.N, self.N)
        return IndexInterval(1, self.N)

    def all_sites(self):
        out = list(self.sites or ())
        for group in (self.pairs or ()) + (self.quads or ()):
            out.extend(group)
        if self.phi_site is not None:
            out.append(self.phi_site)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - _FIELDS
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        for req in ("kind", "N"):
            if req not in data:
                raise ConfigError(f"config lacks required field {req!r}")
        kw = dict(data)
        try:
            if kw.get("distribution") is not None:
                kw["distribution"] = PotentialModel.from_config(kw["distribution"])
            for key in ("sites", "targets"):
                if kw.get(key) is not None:
                    kw[key] = tuple(kw[key])
            for key, width in (("pairs", 2), ("quads", 4)):
                if kw.get(key) is not None:
                    groups = tuple(tuple(int(s) for s in g) for g in kw[key])
                    if any(len(g) != width for g in groups):
                        raise ConfigError(f"every entry of {key} needs {width} sites")
                    kw[key] = groups
            for key in ("N", "trials", "seed", "lo", "sub_lo", "sub_hi", "phi_site"):
                if kw.get(key) is not None:
                    if int(kw[key]) != kw[key]:
                        raise ConfigError(f"{key} must be an integer")
                    kw[key] = int(kw[key])
            if not 0 <= kw.get("seed", 0) < 2**64:
                raise ConfigError("seed must be an unsigned 64-bit integer")
        except InvalidSpec as exc:
            raise ConfigError(str(exc)) from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        return cls(**kw)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "N": self.N}
        for key in ("lo", "sub_lo", "sub_hi"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        for key in ("sites", "targets"):
            if getattr(self, key) is not None:
                out[key] = list(getattr(self, key))
        for key in ("pairs", "quads"):
            if getattr(self, key) is not None:
                out[key] = [list(g) for g in getattr(self, key)]
        if self.distribution is not None:
            out["distribution"] = self.distribution.to_config()
        out.update(trials=self.trials, seed=self.seed, eps_collision=self.eps_collision,
                   tol_atom=self.tol_atom, tol_match=self.tol_match, hopping=self.hopping)
        for key in ("selector", "phi_site", "rule"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out

    def with_overrides(self, seed: int | None = None, trials: int | None = None):
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        if seed is not None:
            kw["seed"] = seed
        if trials is not None:
            kw["trials"] = trials
        return ExperimentConfig(**kw)


# ---------------------------------------------------------------- helpers

def _operator(cfg: ExperimentConfig, sampler: SeededSampler) -> JacobiOperator:
    iv = cfg.interval
    omega = sample_potential(cfg.distribution, iv, sampler)
    return build_operator(iv, cfg.hopping, omega)


def _quantiles(values) -> dict | None:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return None
    q = np.quantile(values, [0.0, 0.5, 1.0])
    return {"q0": float(q[0]), "q50": float(q[1]), "q100": float(q[2])}


def _run_trials(fn: Callable, cfg: ExperimentConfig, workers: int) -> list:
    trial_fn = partial(fn, cfg)
    if workers <= 1 or cfg.trials == 1:
        return [trial_fn(t) for t in range(cfg.trials)]
    chunk = max(1, cfg.trials // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(trial_fn, range(cfg.trials), chunksize=chunk))


def _report(cfg: ExperimentConfig, *, collisions, min_gaps, success_fraction,
            max_residual, started, **extra) -> dict:
    rep = {
        "config": cfg.to_dict(),
        "kind": cfg.kind,
        "seed": cfg.seed,
        "collisions": int(collisions),
        "min_gap_quantiles": _quantiles(min_gaps) if min_gaps is not None else None,
        "success_fraction": float(success_fraction),
        "max_residual": None if max_residual is None else float(max_residual),
    }
    rep.update(extra)
    rep["elapsed_ms"] = int(round((time.perf_counter() - started) * 1000))
    return rep


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def strip_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "elapsed_ms"}


# ------------------------------------------------------------- collisions

def submatrix_interval(cfg: ExperimentConfig) -> IndexInterval:
    """The sub-interval for collision runs, checked for admissibility.

    Allowed: the complement of the sub-interval contains two adjacent sites
    (and, when ``sites`` names them, those two sites), or the sub-interval
    drops exactly one end site.
    """
    iv = cfg.interval
    if cfg.sub_lo is None or cfg.sub_hi is None:
        if not cfg.sites or len(cfg.sites) != 2:
            raise ConfigError("give sub_lo/sub_hi or the excluded pair as sites")
        n0 = min(cfg.sites)
        left, right = n0 - iv.lo, iv.hi - (n0 + 1)
        if left >= right:
            sub = IndexInterval(iv.lo, n0 - 1) if left else None
        else:
            sub = IndexInterval(n0 + 2, iv.hi)
        if sub is None:
            raise ConfigError("no sites left once the excluded pair is removed")
    else:
        try:
            sub = IndexInterval(cfg.sub_lo, cfg.sub_hi)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if not iv.contains(sub) or sub == iv:
        raise ConfigError(f"sub-interval [{sub.lo}, {sub.hi}] must be a proper part of "
                          f"[{iv.lo}, {iv.hi}]")
    if cfg.sites:
        n0, n1 = sorted(cfg.sites)
        if n1 != n0 + 1:
            raise ConfigError("the excluded sites must be adjacent")
        if n0 in sub or n1 in sub:
            raise ConfigError(f"sub-interval [{sub.lo}, {sub.hi}] contains an excluded site")
    left, right = sub.lo - iv.lo, iv.hi - sub.hi
    one_end = left + right == 1
    if not (left >= 2 or right >= 2 or one_end):
        raise ConfigError(f"sub-interval [{sub.lo}, {sub.hi}] must omit two adjacent "
                          "sites or exactly one end site")
    return sub


def _collision_trial(cfg: ExperimentConfig, t: int):
    sub = submatrix_interval(cfg)
    H = _operator(cfg, SeededSampler(cfg.seed).spawn(t))
    ed = eigendecompose(H)
    res, _ = residuals(H, ed)
    sub_eigs = eigenvalues(submatrix(H, sub))
    gap = float(np.abs(np.subtract.outer(ed.eigenvalues, sub_eigs)).min())
    return gap, res / max(ed.norm, np.finfo(float).tiny)


def run_collision(config: ExperimentConfig, workers: int = 1) -> dict:
    """Distance between the spectrum of ``H`` and that of a submatrix, per trial."""
    started = time.perf_counter()
    sub = submatrix_interval(config)
    out = _run_trials(_collision_trial, config, workers)
    gaps = np.array([g for g, _ in out])
    hits = np.flatnonzero(gaps < config.eps_collision)
    events = [{"trial": int(t), "seed": config.seed, "spawn_key": [int(t)],
               "gap": float(gaps[t])} for t in hits]
    return _report(
        config, collisions=hits.size, min_gaps=gaps,
        success_fraction=1.0 - hits.size / config.trials,
        max_residual=max(r for _, r in out), started=started,
        submatrix={"lo": sub.lo, "hi": sub.hi},
        min_gap=float(gaps.min()), collision_events=events,
    )


# ------------------------------------------------------- atom probability

def _targets(cfg: ExperimentConfig, H: JacobiOperator) -> np.ndarray:
    sel = cfg.selector or ("fixed" if cfg.targets is not None else "submatrix")
    if sel == "fixed":
        return np.asarray(cfg.targets or (), dtype=float)
    if sel == "submatrix":
        return eigenvalues(submatrix(H, submatrix_interval(cfg)))
    if sel == "s_zeros":
        return s_polynomial_zeros(H, H.lo, cfg.sites[0])
    raise ConfigError(f"unknown selector {sel!r}")


def _check_selector(cfg: ExperimentConfig):
    sel = cfg.selector or ("fixed" if cfg.targets is not None else "submatrix")
    if sel not in SELECTORS:
        raise ConfigError(f"unknown selector {sel!r}; choose from {SELECTORS}")
    if sel == "submatrix":
        submatrix_interval(cfg)
    if sel == "s_zeros":
        if not cfg.sites:
            raise ConfigError("s_zeros selector needs sites=[n]")
        n = cfg.sites[0]
        iv = cfg.interval
        # the zeros depend on omega(lo..n-1) only; the free pair n, n+1 must exist
        if not iv.lo + 1 <= n <= iv.hi - 1:
            raise ConfigError(f"s_zeros needs lo+1 <= n <= hi-1, got n={n}")


def _atom_trial(cfg: ExperimentConfig, t: int):
    H = _operator(cfg, SeededSampler(cfg.seed).spawn(t))
    ed = eigendecompose(H)
    res, _ = residuals(H, ed)
    phi = basis_vector(H.interval, H.lo if cfg.phi_site is None else cfg.phi_site)
    mu = spectral_measure(ed, phi)
    targets = _targets(cfg, H)
    value = mu.mass_near(targets, cfg.tol_match)
    if targets.size:
        dist = float(np.abs(np.subtract.outer(ed.eigenvalues, targets)).min())
    else:
        dist = float("nan")
    return value, dist, res / max(ed.norm, np.finfo(float).tiny)


def run_atom_probability(config: ExperimentConfig, workers: int = 1) -> dict:
    """Spectral mass of ``delta_phi`` sitting on an omega-dependent target set."""
    started = time.perf_counter()
    _check_selector(config)
    out = _run_trials(_atom_trial, config, workers)
    values = np.array([v for v, _, _ in out])
    dists = np.array([d for _, d, _ in out])
    positive = values > config.tol_atom
    return _report(
        config, collisions=int(positive.sum()), min_gaps=dists,
        success_fraction=1.0 - positive.mean(),
        max_residual=max(r for _, _, r in out), started=started,
        positive_fraction=float(positive.mean()), max_measure=float(values.max()),
        positive_trials=[int(t) for t in np.flatnonzero(positive)],
    )


# ------------------------------------------------------------ equivalence

def _pairs(cfg: ExperimentConfig):
    if cfg.pairs:
        return cfg.pairs
    return tuple(itertools.combinations(list(cfg.interval), 2))


def _equivalence_trial(cfg: ExperimentConfig, t: int):
    H = _operator(cfg, SeededSampler(cfg.seed).spawn(t))
    ed = eigendecompose(H)
    mus = {n: site_measure(ed, n) for n in H.interval}
    failures = []
    for n, m in _pairs(cfg):
        if not equivalent(mus[n], mus[m], cfg.tol_atom, cfg.tol_match):
            bad = equivalence_failures(mus[n], mus[m], cfg.tol_atom, cfg.tol_match)
            failures.append([n, m, [float(x) for x in bad]])
    resid = max(r.max_residual for r in relation_reports(ed, H))
    min_weight = float(np.min([mus[s].weights.min() for s in {x for p in _pairs(cfg) for x in p}]))
    return failures, resid, min_weight


def run_equivalence(config: ExperimentConfig, workers: int = 1) -> dict:
    """Mutual absolute continuity of site measures, pair by pair."""
    started = time.perf_counter()
    pairs = _pairs(config)
    out = _run_trials(_equivalence_trial, config, workers)
    checks = config.trials * len(pairs)
    n_fail = sum(len(f) for f, _, _ in out)
    failures = [{"trial": t, "pair": f[:2], "locations": f[2]}
                for t, (fs, _, _) in enumerate(out) for f in fs]
    return _report(
        config, collisions=n_fail, min_gaps=None,
        success_fraction=1.0 - n_fail / checks,
        max_residual=max(r for _, r, _ in out), started=started,
        checks=checks, failures=failures,
        min_weight_quantiles=_quantiles([w for _, _, w in out]),
    )


def _sum_trial(cfg: ExperimentConfig, t: int):
    H = _operator(cfg, SeededSampler(cfg.seed).spawn(t))
    ed = eigendecompose(H)
    mus = {}

    def mu(n):
        if n not in mus:
            mus[n] = site_measure(ed, n)
        return mus[n]

    failures, resid, min_weight = [], 0.0, np.inf
    for k, l, m, n in cfg.quads:
        lhs, rhs = mu(k) + mu(l), mu(m) + mu(n)
        if not equivalent(lhs, rhs, cfg.tol_atom, cfg.tol_match):
            bad = equivalence_failures(lhs, rhs, cfg.tol_atom, cfg.tol_match)
            failures.append([k, l, m, n, [float(x) for x in bad]])
        min_weight = min(min_weight, lhs.weights.min(), rhs.weights.min())
        quad = (k, l, m, n)
        for base in quad:
            if base + 1 > H.hi:
                continue
            for target in quad:
                resid = max(resid, g_identity_residual(H, ed, base, target, cfg.tol_atom))
    return failures, resid, float(min_weight)


def run_sum_equivalence(config: ExperimentConfig, workers: int = 1) -> dict:
    """Equivalence of ``mu_k + mu_l`` and ``mu_m + mu_n`` for each configured quadruple."""
    started = time.perf_counter()
    if not config.quads:
        raise ConfigError("sum_equivalence needs quads")
    out = _run_trials(_sum_trial, config, workers)
    checks = config.trials * len(config.quads)
    n_fail = sum(len(f) for f, _, _ in out)
    failures = [{"trial": t, "quad": f[:4], "locations": f[4]}
                for t, (fs, _, _) in enumerate(out) for f in fs]
    return _report(
        config, collisions=n_fail, min_gaps=None,
        success_fraction=1.0 - n_fail / checks,
        max_residual=max(r for _, r, _ in out), started=started,
        checks=checks, failures=failures,
        min_weight_quantiles=_quantiles([w for _, _, w in out]),
    )


# --------------------------------------------------------- counterexample

def run_counterexample(size: int = 3, tol: float = 1e-12) -> dict:
    """Zero-diagonal free matrix of odd size: ``mu_1`` and ``mu_2`` are not equivalent.

    The eigenvector for eigenvalue 0 is ``(1, 0, -1, 0, 1, ...)``, so
    ``mu_1({0}) = 1/((size+1)/2)`` while every even site carries no mass at 0,
    matching ``s_1(0, 2) = 0``.
    """
    started = time.perf_counter()
    if size < 3 or size % 2 == 0:
        raise ConfigError("counterexample needs an odd size >= 3")
    H = free_operator(size)
    ed = eigendecompose(H)
    mu1, mu2 = site_measure(ed, 1), site_measure(ed, 2)
    tm = 1e-8 * (ed.eigenvalues[-1] - ed.eigenvalues[0])
    expected = 2.0 / (size + 1)
    mu1_0 = mu1.mass_at(0.0, tm)
    s_val = float(fundamental_solutions(H, 1, 0.0).s_at(2))
    mu2_0 = mu2.mass_at(0.0, tm)
    equiv = equivalent(mu1, mu2)
    checks = [
        {"name": "mu_1({0})", "value": mu1_0, "expected": expected,
         "passed": abs(mu1_0 - expected) <= tol},
        {"name": "s_1(0,2)", "value": s_val, "expected": 0.0, "passed": s_val == 0.0},
        {"name": "mu_2({0})", "value": mu2_0, "expected": 0.0, "passed": mu2_0 <= tol},
        {"name": "equivalent(mu_1,mu_2)", "value": equiv, "expected": False,
         "passed": equiv is False},
    ]
    even = {n: site_measure(ed, n).mass_at(0.0, tm) for n in range(2, size + 1, 2)}
    return {
        "kind": "counterexample",
        "size": size,
        "checks": checks,
        "even_site_mass_at_zero": {str(n): v for n, v in even.items()},
        "passed": all(c["passed"] for c in checks),
        "elapsed_ms": int(round((time.perf_counter() - started) * 1000)),
    }


# ---------------------------------------------------------------- Carleman

def carleman_rule(rule) -> Callable[[int], float]:
    """Off-diagonal sequence ``n -> a(n)`` on all of Z from a rule description.

    ``{"rule": "constant", "c": c}``
        ``a(n) = c``
    ``{"rule": "power", "p": p}``
        ``a(n) = (n+1)^p`` for ``n >= 0`` and ``1`` for ``n < 0``
    ``{"rule": "geometric", "r": r}``
        ``a(n) = r^|n|``
    ``{"rule": "explicit", "values": {...}}``
        a mapping ``n -> a(n)``
    A callable is used as is.
    """
    if callable(rule):
        return rule
    if not isinstance(rule, dict) or "rule" not in rule:
        raise ConfigError(f"unrecognized Carleman rule {rule!r}")
    kind = rule["rule"]
    if kind == "constant":
        c = float(rule.get("c", 1.0))
        return lambda n: c
    if kind == "power":
        p = float(rule.get("p", 1.0))
        return lambda n: float(n + 1) ** p if n >= 0 else 1.0
    if kind == "geometric":
        r = float(rule.get("r", 2.0))
        return lambda n: r ** abs(n)
    if kind == "explicit":
        values = {int(k): float(v) for k, v in rule["values"].items()}

        def a(n):
            if n not in values:
                raise ConfigError(f"explicit rule lacks a({n})")
            return values[n]
        return a
    raise ConfigError(f"unknown Carleman rule {kind!r}")


def carleman_partial_sums(rule, N: int) -> np.ndarray:
    """``S_k = sum_{n=1}^{k} 1 / max(a(-n-1), a(n-1))`` for ``k = 1..N``.

    Only the partial sums are reported; deciding divergence is left to the
    reader.
    """
    a = carleman_rule(rule)
    terms = np.empty(N)
    for n in range(1, N + 1):
        left, right = a(-n - 1), a(n - 1)
        for idx, val in ((-n - 1, left), (n - 1, right)):
            if not val > 0:
                raise NonPositiveOffDiagonal(f"a({idx}) = {val!r} is not positive")
        terms[n - 1] = 1.0 / max(left, right)
    return np.cumsum(terms)


# ---------------------------------------------------------------- dispatch

def run_experiment(config: ExperimentConfig | dict, workers: int = 1) -> dict:
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    if config.kind == "collision":
        return run_collision(config, workers)
    if config.kind == "atom_probability":
        return run_atom_probability(config, workers)
    if config.kind == "equivalence":
        return run_equivalence(config, workers)
    if config.kind == "sum_equivalence":
        return run_sum_equivalence(config, workers)
    if config.kind == "counterexample":
        rep = run_counterexample(config.N)
        rep["config"] = config.to_dict()
        return rep
    started = time.perf_counter()
    sums = carleman_partial_sums(config.rule or {"rule": "constant", "c": config.hopping},
                                 config.N)
    return {
        "config": config.to_dict(),
        "kind": "carleman",
        "partial_sums": [float(x) for x in sums],
        "elapsed_ms": int(round((time.perf_counter() - started) * 1000)),
    }
