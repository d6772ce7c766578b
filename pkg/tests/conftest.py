import numpy as np
import pytest

from randjacobi import IndexInterval, build_operator

_CRITERIA = {}


def random_operator(rng, N, lo=1, a_range=(0.5, 2.0), omega_range=(-1.0, 1.0)):
    """Jacobi operator with uniform off-diagonal and potential entries."""
    a = rng.uniform(*a_range, N - 1)
    omega = rng.uniform(*omega_range, N)
    return build_operator(IndexInterval(lo, lo + N - 1), a, omega)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance criterion.

    Call with ``(number, passed, detail)``; the outcome is printed in the
    terminal summary and the test fails when ``passed`` is false.
    """
    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)
        assert passed, f"criterion {number}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_runtest_logreport(report):
    # a criterion test that raised before recording still gets a FAIL line
    name = report.nodeid.rpartition("::")[2]
    if report.when == "call" and report.failed and name.startswith("test_criterion_"):
        number = int(name.split("_")[2])
        if number not in _CRITERIA:
            msg = str(report.longrepr).strip().splitlines()[-1]
            _CRITERIA[number] = (False, msg[:120])


def operators(max_size=12, min_size=1):
    """Hypothesis strategy for small random Jacobi operators."""
    from hypothesis import strategies as st

    @st.composite
    def build(draw):
        N = draw(st.integers(min_size, max_size))
        lo = draw(st.integers(-6, 6))
        seed = draw(st.integers(0, 2**32 - 1))
        return random_operator(np.random.default_rng(seed), N, lo=lo)
    return build()
