import math
from pathlib import Path

import numpy as np
import pytest

from stplds.algebra import LogicalMatrix

MODELS = Path(__file__).resolve().parent.parent / "models"

# Matrices from the worked two-node examples, entered verbatim.
EX1_Q1 = np.array([[0.3, 0.5, 1.0, 0.2], [0.7, 0.5, 0.0, 0.8]])
EX1_Q2 = np.array([[0.4, 0.2, 0.5, 0.7], [0.6, 0.8, 0.5, 0.3]])
EX1_Q = np.array(
    [
        [0.12, 0.1, 0.5, 0.14],
        [0.18, 0.4, 0.5, 0.06],
        [0.28, 0.1, 0.0, 0.56],
        [0.42, 0.4, 0.0, 0.24],
    ]
)
EX1_P1 = np.array([0.4, 0.6])
EX1_P2 = np.array([0.5, 0.5])
EX2_Q1 = np.array([[0.3, 0.4, 0.4, 0.3], [0.7, 0.6, 0.6, 0.3]])
EX2_Q2 = np.array([[0.2, 0.3, 0.3, 0.3], [0.8, 0.7, 0.7, 0.7]])
EX3_Q1 = np.array([[0.3, 0.3, 0.3, 0.3], [0.7, 0.7, 0.7, 0.7]])
EX3_Q2 = np.array([[0.2, 0.6, 0.1, 0.4], [0.8, 0.4, 0.9, 0.6]])


def random_stochastic(rng, rows, cols):
    m = rng.random((rows, cols)) + 1e-3
    return m / m.sum(axis=0)


def random_logical(rng, rows, cols):
    return LogicalMatrix(rows, rng.integers(1, rows + 1, size=cols))


def random_lifted(rng, alphabets, constant=()):
    """Random lifted stochastic factors; nodes in ``constant`` (1-based) get identical columns."""
    k = math.prod(alphabets)
    out = []
    for i, a in enumerate(alphabets, start=1):
        if i in constant:
            v = random_stochastic(rng, a, 1)
            out.append(np.repeat(v, k, axis=1))
        else:
            out.append(random_stochastic(rng, a, k))
    return out


def random_product_initial(rng, alphabets):
    return [random_stochastic(rng, a, 1)[:, 0] for a in alphabets]


@pytest.fixture
def rng():
    return np.random.default_rng(20240519)


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record a one-line pass/fail for an acceptance criterion, then assert it."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
