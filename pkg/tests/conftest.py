import numpy as np
import pytest

from cmvreserve.simulator import SimSpec, simulate_triangle
from cmvreserve.rng import RngStream
from cmvreserve.triangle import Triangle

HAND_ROWS = [[100, 150, 165], [110, 176], [120]]


@pytest.fixture
def hand_triangle():
    return Triangle.from_rows(HAND_ROWS)


@pytest.fixture(scope="session")
def study_spec():
    return SimSpec()


@pytest.fixture(scope="session")
def sim_triangle(study_spec):
    return simulate_triangle(study_spec, RngStream(5))


def noiseless_triangle(n=6, alpha=(2.0, 1.0), seed=1):
    spec = SimSpec(n=n, alpha=alpha, error_marginal="degenerate")
    return simulate_triangle(spec, RngStream(seed))


def random_triangle(n, rng, low=50.0, high=150.0):
    """Cumulative triangle with strictly increasing rows."""
    rows = []
    for i in range(n):
        inc = rng.uniform(low, high, size=n - i)
        rows.append(np.cumsum(inc))
    return Triangle.from_rows(rows)


ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
