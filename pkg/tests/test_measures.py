import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import operators, random_operator
from randjacobi.eigensolve import eigendecompose
from randjacobi.errors import LengthMismatch, NullAtom, RangeError, ZeroVector
from randjacobi.measures import (
    AtomicMeasure,
    absolutely_continuous,
    check_semiinfinite_relation,
    equivalence_failures,
    equivalent,
    g_factor,
    g_factors,
    g_identity_residual,
    load_measure_csv,
    match_tolerance,
    matrix_measure,
    relation_reports,
    rn_matrices,
    rn_matrix,
    site_measure,
    spectral_measure,
)
from randjacobi.operator import basis_vector, free_operator
from randjacobi.polynomials import fundamental_solutions

R2 = np.sqrt(2.0)


@pytest.fixture
def free3():
    H = free_operator(3)
    return H, eigendecompose(H)


def test_free_site_measures(free3):
    _, ed = free3
    mu1 = site_measure(ed, 1)
    np.testing.assert_allclose(mu1.locations, [-R2, 0, R2], atol=1e-14)
    np.testing.assert_allclose(mu1.weights, [0.25, 0.5, 0.25], atol=1e-14)
    np.testing.assert_allclose(site_measure(ed, 2).weights, [0.5, 0, 0.5], atol=1e-14)


def test_free_rn_matrix_and_g(free3):
    H, ed = free3
    rn = rn_matrix(matrix_measure(ed, 1), R2)
    assert rn.a == pytest.approx(1 / 3, abs=1e-14)
    assert rn.b == pytest.approx(R2 / 3, abs=1e-14)
    g = g_factor(H, 1, 3, rn)
    assert g == pytest.approx(1 / 3, abs=1e-14)
    assert g * 0.75 == pytest.approx(site_measure(ed, 3).mass_at(R2), abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(operators(max_size=20))
def test_site_measures_are_probability_and_resolve_identity(H):
    ed = eigendecompose(H)
    total = np.zeros(H.size)
    for n in H.interval:
        mu = site_measure(ed, n)
        assert mu.total == pytest.approx(1.0, abs=1e-12)
        total += mu.weights
    # sum over sites of mu_n({l_j}) = |v_j|^2 = 1 for every eigenvalue
    np.testing.assert_allclose(total, 1.0, atol=1e-12)


def test_spectral_measure_of_general_vector(rng):
    H = random_operator(rng, 9)
    ed = eigendecompose(H)
    phi = rng.normal(size=9)
    mu = spectral_measure(ed, phi)
    assert mu.total == pytest.approx(phi @ phi)
    # first moment is <phi, H phi>
    assert mu.locations @ mu.weights == pytest.approx(phi @ H.to_dense() @ phi)
    with pytest.raises(ZeroVector):
        spectral_measure(ed, np.zeros(9))
    with pytest.raises(LengthMismatch):
        spectral_measure(ed, np.ones(8))
    with pytest.raises(RangeError):
        site_measure(ed, 10)


@settings(max_examples=60, deadline=None)
@given(operators(max_size=20))
def test_semiinfinite_relation(H):
    ed = eigendecompose(H)
    for rep in relation_reports(ed, H):
        assert rep.max_residual <= 1e-8
    assert check_semiinfinite_relation(ed, H, H.lo).max_s == 0.0


def test_relation_reports_agree_with_single_site(rng):
    H = random_operator(rng, 8)
    ed = eigendecompose(H)
    reps = relation_reports(ed, H)
    for rep in reps:
        single = check_semiinfinite_relation(ed, H, rep.site)
        np.testing.assert_array_equal(single.s_residuals, rep.s_residuals)
        np.testing.assert_array_equal(single.c_residuals, rep.c_residuals)


@settings(max_examples=40, deadline=None)
@given(operators(min_size=2, max_size=15), st.data())
def test_matrix_measure_structure(H, data):
    ed = eigendecompose(H)
    m = data.draw(st.integers(H.lo, H.hi - 1))
    mm = matrix_measure(ed, m)
    np.testing.assert_allclose(mm.matrices[:, 0, 0], site_measure(ed, m).weights)
    np.testing.assert_allclose(mm.matrices[:, 1, 1], site_measure(ed, m + 1).weights)
    # each atom is a rank-one PSD matrix
    det = mm.matrices[:, 0, 0] * mm.matrices[:, 1, 1] - mm.matrices[:, 0, 1] ** 2
    np.testing.assert_allclose(det, 0.0, atol=1e-15)
    for rn in rn_matrices(mm):
        assert np.trace(rn.matrix) == pytest.approx(1.0)
        assert np.linalg.eigvalsh(rn.matrix).min() >= -1e-12
        assert rn.b ** 2 == pytest.approx(rn.a * (1 - rn.a), abs=1e-12)
        np.testing.assert_allclose(np.outer(rn.factor, rn.factor), rn.matrix, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(operators(min_size=2, max_size=15), st.data())
def test_g_identity(H, data):
    ed = eigendecompose(H)
    m = data.draw(st.integers(H.lo, H.hi - 1))
    for n in H.interval:
        assert g_identity_residual(H, ed, m, n) <= 1e-8


def test_g_factor_agrees_with_dense_quadratic_form(rng):
    # close to m the plain quadratic form p^T R p is accurate
    H = random_operator(rng, 6)
    ed = eigendecompose(H)
    for m in range(1, 6):
        g, _ = g_factors(H, ed, m, min(m + 2, 6))
        for j, rn in enumerate(rn_matrices(matrix_measure(ed, m))):
            sol = fundamental_solutions(H, m + 1, rn.location)
            p = np.array([sol.c_at(min(m + 2, 6)), sol.s_at(min(m + 2, 6))])
            assert g_factor(H, m, min(m + 2, 6), rn) == pytest.approx(p @ rn.matrix @ p, abs=1e-12)
            assert g[j] == pytest.approx(p @ rn.matrix @ p, abs=1e-12)


def test_g_factor_vanishes_where_target_has_no_mass():
    # free 3x3: mu_1 + mu_2 charges 0, but mu_2 alone does not
    H = free_operator(3)
    ed = eigendecompose(H)
    g, tr = g_factors(H, ed, 1, 2)
    assert not np.isnan(g).any()
    assert g[1] * tr[1] == pytest.approx(0.0, abs=1e-24)


def test_rn_matrix_errors(free3):
    H, ed = free3
    mm = matrix_measure(ed, 1)
    with pytest.raises(NullAtom):
        rn_matrix(mm, 5.0)
    with pytest.raises(RangeError):
        matrix_measure(ed, 3)


def test_rn_matrix_null_mass():
    from randjacobi.measures import MatrixMeasure
    mm = MatrixMeasure(1, np.array([0.0, 1.0]),
                       np.array([[[0.0, 0.0], [0.0, 0.0]], [[0.5, 0.5], [0.5, 0.5]]]))
    with pytest.raises(NullAtom):
        rn_matrix(mm, 0.0)
    assert [rn.location for rn in rn_matrices(mm)] == [1.0]


def test_equivalence_predicates():
    mu = AtomicMeasure([0.0, 1.0, 2.0], [0.2, 0.3, 0.5])
    nu = AtomicMeasure([0.0, 1.0, 2.0], [0.6, 0.4, 0.0])
    assert absolutely_continuous(nu, mu)
    assert not absolutely_continuous(mu, nu)
    assert not equivalent(mu, nu)
    np.testing.assert_array_equal(equivalence_failures(mu, nu), [2.0])
    assert equivalent(mu, mu.with_density([1.0, 2.0, 3.0]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([0.0, 0.5, 1.0, 3.0]), min_size=1, max_size=10),
       st.integers(0, 2**32 - 1))
def test_density_criterion(f, seed):
    # gamma = f d mu is equivalent to mu exactly when mu({f = 0}) = 0
    rng = np.random.default_rng(seed)
    mu = AtomicMeasure(np.sort(rng.normal(size=len(f))) + np.arange(len(f)),
                       rng.uniform(0.1, 1.0, len(f)))
    gamma = mu.with_density(f)
    null_mass = mu.weights[np.asarray(f) == 0].sum()
    assert equivalent(gamma, mu) == (null_mass == 0)


def test_atomic_measure_operations():
    mu = AtomicMeasure([0.0, 1.0], [0.25, 0.75])
    nu = AtomicMeasure([1.0, 2.0], [0.5, 0.5])
    s = mu + nu
    np.testing.assert_array_equal(s.locations, [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(s.weights, [0.25, 1.25, 0.5])
    assert s.total == 2.0 and s.diameter == 2.0
    assert s.mass_at(1.0 + 1e-12) == 1.25
    assert s.mass_at(1.5, tol=0.1) == 0.0
    assert s.mass_near([0.0, 2.0, 2.0]) == 0.75
    np.testing.assert_array_equal(s.support(0.3), [1.0, 2.0])
    assert match_tolerance(s) == pytest.approx(2e-8)
    assert len(AtomicMeasure([], [])) == 0


def test_atomic_measure_validation():
    with pytest.raises(ValueError):
        AtomicMeasure([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        AtomicMeasure([0.0, 1.0], [0.5, -0.5])
    with pytest.raises(LengthMismatch):
        AtomicMeasure([0.0, 1.0], [0.5])
    with pytest.raises(ValueError):
        AtomicMeasure([0.0], [1.0]).with_density([-1.0])


def test_csv_round_trip(tmp_path, rng):
    ed = eigendecompose(random_operator(rng, 7))
    mu = site_measure(ed, 3)
    path = tmp_path / "mu.csv"
    mu.to_csv(path)
    back = load_measure_csv(path)
    np.testing.assert_array_equal(back.locations, mu.locations)
    np.testing.assert_array_equal(back.weights, mu.weights)
    back.to_csv(tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()
    assert path.read_text().splitlines()[0] == "location,weight"


def test_matrix_measure_csv(free3):
    _, ed = free3
    buf = io.StringIO()
    matrix_measure(ed, 1).to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "location,m11,m12,m22"
    assert len(lines) == 4
    loc, m11, m12, m22 = map(float, lines[3].split(","))
    assert (loc, m11, m12, m22) == pytest.approx((R2, 0.25, R2 / 4, 0.5))


def test_basis_vector_measure_is_site_measure(rng):
    H = random_operator(rng, 6, lo=-2)
    ed = eigendecompose(H)
    np.testing.assert_allclose(spectral_measure(ed, basis_vector(H.interval, 0)).weights,
                               site_measure(ed, 0).weights)
