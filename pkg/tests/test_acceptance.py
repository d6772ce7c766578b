"""Acceptance gate: one test per criterion, each at its stated tolerance.

Every test reports a PASS/FAIL line through the ``criterion`` fixture; the
lines are printed in the pytest terminal summary.
"""

import time

import numpy as np
import pytest
from scipy import stats

import oracle
from conftest import random_operator
from randjacobi.eigensolve import eigendecompose, residuals
from randjacobi.experiments import (
    ExperimentConfig,
    report_json,
    run_counterexample,
    run_experiment,
    strip_timing,
)
from randjacobi.measures import (
    g_identity_residual,
    matrix_measure,
    relation_reports,
    rn_matrices,
    site_measure,
)
from randjacobi.operator import IndexInterval, build_operator
from randjacobi.polynomials import fundamental_solutions, green_residual, reconstruct_delta, wronskian
from randjacobi.randomness import DistributionSpec, SeededSampler, cantor_cdf

SEED = 2024


def test_criterion_01_eigensolver_contract(criterion):
    rng = np.random.default_rng(1)
    sizes = np.concatenate([[2, 200], rng.integers(2, 201, 198)])
    worst_res = worst_orth = worst_trace = 0.0
    t0 = time.perf_counter()
    for N in sizes:
        H = random_operator(rng, int(N))
        ed = eigendecompose(H)
        res, orth = residuals(H, ed)
        worst_res = max(worst_res, res / ed.norm)
        worst_orth = max(worst_orth, orth / N)
        # relative to ||H|| as well as |sum omega|, which can be close to 0
        scale = max(abs(H.omega.sum()), ed.norm)
        worst_trace = max(worst_trace, abs(ed.eigenvalues.sum() - H.omega.sum()) / scale)
    elapsed = time.perf_counter() - t0
    ok = worst_res <= 1e-12 and worst_orth <= 1e-12 and worst_trace <= 1e-10 and elapsed < 30
    criterion(1, ok, f"residual/||H|| {worst_res:.1e}, orth/N {worst_orth:.1e}, "
                     f"trace {worst_trace:.1e}, {elapsed:.1f} s")


def _term_scale(H, xi, eta, n):
    i = n - H.lo
    return H.a_at(n) * (abs(xi[i] * eta[i + 1]) + abs(eta[i] * xi[i + 1]))


def test_criterion_02_green_and_wronskian(criterion):
    rng = np.random.default_rng(2)
    worst_green = worst_wr = 0.0
    t0 = time.perf_counter()
    for k in range(1000):
        N = int(rng.integers(3, 21))
        H = random_operator(rng, N)
        if k % 2:
            z = complex(rng.uniform(-2.5, 2.5), rng.uniform(-0.5, 0.5))
        else:
            z = rng.uniform(-2.5, 2.5)
        m = int(rng.integers(2, N + 1))
        n = int(rng.integers(1, N))
        # Wronskian of two solutions at z is independent of the site
        sol = fundamental_solutions(H, m, z, start=H.lo, stop=H.hi)
        alpha, beta = rng.normal(size=2)
        xi, eta = sol.c, alpha * sol.c + beta * sol.s
        n0 = int(rng.integers(1, N))
        drift = abs(wronskian(H, xi, eta, n) - wronskian(H, xi, eta, n0))
        worst_wr = max(worst_wr, drift / max(_term_scale(H, xi, eta, n),
                                             _term_scale(H, xi, eta, n0)))
        # Green formula on arbitrary sequences
        x, y = rng.normal(size=(2, N))
        hi = int(rng.integers(2, N))
        lo = int(rng.integers(1, hi))
        worst_green = max(worst_green, abs(green_residual(H, x, y, lo, hi)))
    elapsed = time.perf_counter() - t0
    ok = worst_green <= 1e-10 and worst_wr <= 1e-10 and elapsed < 5
    criterion(2, ok, f"Green {worst_green:.1e}, Wronskian drift {worst_wr:.1e} "
                     f"(relative to term size), {elapsed:.1f} s")


def test_criterion_03_delta_reconstruction(criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(2, 13))
        H = random_operator(rng, N, lo=int(rng.integers(-5, 6)))
        ed = eigendecompose(H)
        eye = np.eye(N)
        for n in H.interval:
            target = eye[n - H.lo]
            for branch in ("left", "right"):
                v = reconstruct_delta(H, n, branch, ed=ed)
                worst = max(worst, np.abs(v - target).max())
            for m in range(H.lo, H.hi):
                v = reconstruct_delta(H, n, "pair", m=m, ed=ed)
                worst = max(worst, np.abs(v - target).max())
    criterion(3, worst <= 1e-8, f"max reconstruction error {worst:.1e}")


def test_criterion_04_semiinfinite_relation(criterion):
    rng = np.random.default_rng(4)
    worst_s = worst_c = 0.0
    for _ in range(100):
        N = int(rng.integers(2, 31))
        H = random_operator(rng, N)
        ed = eigendecompose(H)
        for rep in relation_reports(ed, H):
            worst_s, worst_c = max(worst_s, rep.max_s), max(worst_c, rep.max_c)
    ok = worst_s <= 1e-8 and worst_c <= 1e-8
    criterion(4, ok, f"s-form {worst_s:.1e}, c-form {worst_c:.1e}")


def test_criterion_05_matrix_measure_and_g_identity(criterion):
    rng = np.random.default_rng(5)
    worst_tr = worst_psd = worst_rank = worst_g = 0.0
    for _ in range(100):
        N = int(rng.integers(2, 31))
        H = random_operator(rng, N)
        ed = eigendecompose(H)
        for m in range(H.lo, H.hi):
            mm = matrix_measure(ed, m)
            tr = mm.matrices[:, 0, 0] + mm.matrices[:, 1, 1]
            R = mm.matrices / tr[:, None, None]
            worst_tr = max(worst_tr, np.abs(R[:, 0, 0] + R[:, 1, 1] - 1).max())
            worst_psd = max(worst_psd, max(0.0, -np.linalg.eigvalsh(R).min()))
            for rn in rn_matrices(mm):
                worst_rank = max(worst_rank, abs(rn.b**2 - rn.a * (1 - rn.a)))
            for n in H.interval:
                worst_g = max(worst_g, g_identity_residual(H, ed, m, n))
    ok = max(worst_tr, worst_psd, worst_rank) <= 1e-10 and worst_g <= 1e-8
    criterion(5, ok, f"trace {worst_tr:.1e}, PSD {worst_psd:.1e}, "
                     f"b^2-a(1-a) {worst_rank:.1e}, g-identity {worst_g:.1e}")


def test_criterion_06_collision_experiment(criterion):
    t0 = time.perf_counter()
    rep = run_experiment({"kind": "collision", "N": 10, "sites": [5, 6],
                          "distribution": {"kind": "uniform", "low": 0, "high": 1},
                          "trials": 10_000, "seed": SEED, "eps_collision": 1e-9})
    elapsed = time.perf_counter() - t0
    cantor = run_experiment({"kind": "collision", "N": 10, "sites": [5, 6],
                             "distribution": {"kind": "cantor"},
                             "trials": 1000, "seed": SEED, "eps_collision": 1e-9})
    ok = (rep["collisions"] == 0 and rep["min_gap"] > 1e-9 and elapsed < 60
          and cantor["collisions"] == 0)
    criterion(6, ok, f"uniform: {rep['collisions']} collisions, min gap "
                     f"{rep['min_gap']:.2e}, {elapsed:.1f} s; cantor: "
                     f"{cantor['collisions']} collisions")


def test_criterion_07_equivalence_experiment(criterion):
    fractions = {}
    for dist in ({"kind": "uniform", "low": 0, "high": 1}, {"kind": "cantor"}):
        rep = run_experiment({"kind": "equivalence", "N": 8, "distribution": dist,
                              "trials": 1000, "seed": SEED})
        fractions[dist["kind"]] = rep["success_fraction"]
    ok = all(f == 1.0 for f in fractions.values())
    criterion(7, ok, ", ".join(f"{k} {v}" for k, v in fractions.items()))


def test_criterion_08_sum_equivalence_experiment(criterion):
    rep = run_experiment({"kind": "sum_equivalence", "N": 31, "lo": -15,
                          "quads": [[0, 1, -3, 4], [-5, 2, 0, 1]],
                          "distribution": {"kind": "gaussian", "mean": 0, "sd": 1},
                          "trials": 1000, "seed": SEED})
    ok = rep["success_fraction"] == 1.0
    criterion(8, ok, f"success fraction {rep['success_fraction']}, "
                     f"max g-identity residual {rep['max_residual']:.1e}")


def test_criterion_09_counterexample(criterion):
    details, ok = [], True
    for size, expected in ((3, 0.5), (5, 1 / 3)):
        rep = run_counterexample(size)
        by_name = {c["name"]: c["value"] for c in rep["checks"]}
        ok &= abs(by_name["mu_1({0})"] - expected) <= 1e-12
        ok &= by_name["s_1(0,2)"] == 0.0
        ok &= by_name["mu_2({0})"] <= 1e-12
        ok &= by_name["equivalent(mu_1,mu_2)"] is False
        ok &= rep["passed"]
        details.append(f"{size}x{size}: mu_1({{0}})={by_name['mu_1({0})']:.15f}, "
                       f"mu_2({{0}})={by_name['mu_2({0})']:.1e}")
    criterion(9, ok, "; ".join(details))


def test_criterion_10_cantor_sampler(criterion):
    x = DistributionSpec("cantor").sample(SeededSampler(SEED), 100_000)
    ks = stats.kstest(x, cantor_cdf).statistic
    exact = cantor_cdf(1 / 3) == 0.5 and cantor_cdf(1 / 9) == 0.25
    criterion(10, ks <= 0.01 and exact,
              f"KS {ks:.4f} at 1e5 draws, cdf(1/3)={cantor_cdf(1 / 3)}, "
              f"cdf(1/9)={cantor_cdf(1 / 9)}")


DETERMINISM_CONFIGS = [
    {"kind": "collision", "N": 10, "sites": [5, 6],
     "distribution": {"kind": "uniform", "low": 0, "high": 1}, "trials": 200},
    {"kind": "equivalence", "N": 6, "distribution": {"kind": "cantor"}, "trials": 50},
    {"kind": "sum_equivalence", "N": 5, "quads": [[0, 1, -3, 4]],
     "distribution": {"kind": "gaussian"}, "trials": 50},
    {"kind": "atom_probability", "N": 8, "sites": [4, 5], "selector": "submatrix",
     "distribution": {"kind": "uniform"}, "trials": 50},
    {"kind": "counterexample", "N": 5},
    {"kind": "carleman", "N": 20, "rule": {"rule": "power", "p": 1}},
]


def test_criterion_11_determinism(criterion):
    mismatched = []
    for cfg in DETERMINISM_CONFIGS:
        cfg = dict(cfg, seed=SEED)
        first = report_json(strip_timing(run_experiment(cfg)))
        second = report_json(strip_timing(run_experiment(cfg)))
        if first != second:
            mismatched.append(cfg["kind"])
    # the trial-to-stream mapping must not depend on scheduling either
    cfg = ExperimentConfig.from_dict(dict(DETERMINISM_CONFIGS[0], seed=SEED))
    serial = report_json(strip_timing(run_experiment(cfg, workers=1)))
    parallel = report_json(strip_timing(run_experiment(cfg, workers=2)))
    if serial != parallel:
        mismatched.append("collision (workers=2)")
    criterion(11, not mismatched,
              f"{len(DETERMINISM_CONFIGS)} kinds plus a parallel run; "
              f"mismatches: {mismatched or 'none'}")


def test_criterion_12_bruteforce_oracle(criterion):
    rng = np.random.default_rng(12)
    worst_w = worst_l = 0.0
    for k in range(200):
        N = 1 + k % 8
        a, omega = rng.uniform(0.5, 2.0, N - 1), rng.uniform(-1.0, 1.0, N)
        H = build_operator(IndexInterval(1, N), a, omega)
        ed = eigendecompose(H)
        M = oracle.dense(a, omega)
        lam = oracle.bisection_eigenvalues(M)
        worst_l = max(worst_l, np.abs(lam - ed.eigenvalues).max())
        for site in H.interval:
            ref = oracle.residue_weights(M, lam, site - 1)
            worst_w = max(worst_w, np.abs(site_measure(ed, site).weights - ref).max())
    ok = worst_w <= 1e-8 and worst_l <= 1e-8
    criterion(12, ok, f"200 matrices N<=8: weights {worst_w:.1e}, eigenvalues {worst_l:.1e}")


@pytest.mark.parametrize("size", [3, 5, 7, 9])
def test_counterexample_pattern_other_sizes(size):
    rep = run_counterexample(size)
    assert rep["passed"]
    assert all(v <= 1e-12 for v in rep["even_site_mass_at_zero"].values())
