import numpy as np
import pytest

from occmdp.model import FiniteMdp, m2


def two_state_invariant(P):
    """Closed-form invariant law of a 2x2 stochastic matrix."""
    a, b = P[0, 1], P[1, 0]
    return np.array([b, a]) / (a + b)


@pytest.fixture
def M2():
    return m2()


@pytest.fixture
def one_state():
    return FiniteMdp.from_arrays([[[1.0]]], [[1.0]])


@pytest.fixture
def two_cycle():
    """Single-action deterministic 2-cycle with costs (0, 1)."""
    return FiniteMdp.from_arrays([[[0.0, 1.0]], [[1.0, 0.0]]], [[0.0], [1.0]])


@pytest.fixture
def block_model():
    """Two disjoint 2-cycles {0,1} and {2,3}; class costs 1 and 5."""
    K = np.zeros((4, 1, 4))
    K[0, 0, 1] = K[1, 0, 0] = K[2, 0, 3] = K[3, 0, 2] = 1.0
    return FiniteMdp.from_arrays(K, [[1.0], [1.0], [5.0], [5.0]])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
