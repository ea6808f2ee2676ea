import sys
from pathlib import Path

import numpy as np
import pytest

from sltrans.problem import cfg_a, cfg_b, from_arrays
from sltrans.spectrum import compute_eigenpairs

sys.path.insert(0, str(Path(__file__).parent))

CFG_A_WINDOW = (-5.0, 4500.0, 3000)
CFG_B_WINDOW = (-5.0, 1500.0, 2000)


@pytest.fixture(scope="session")
def problem_a():
    return cfg_a()


@pytest.fixture(scope="session")
def problem_b():
    return cfg_b()


@pytest.fixture(scope="session")
def problem_negative():
    """Transmission data that break self-adjointness: delta1 = delta2 = 2, p = 1."""
    return from_arrays((-1 / 3, 1 / 3), "1", "1", "0", (0, -1), (1, 0), (1, 1, 1, 1), (2, 2, 1, 1))


@pytest.fixture(scope="session")
def problem_variable():
    """Variable coefficients, self-adjoint jumps at both breakpoints, alpha2 = 0."""
    return from_arrays(
        (-0.2, 0.4),
        ("1 + x^2", "2", "exp(x)"),
        ("1", "2", "1.6 + x"),
        ("x", "0", "1"),
        (1, 0),
        (0.5, 1),
        (1, 1, 2, 1),
        (1, 2, 1, 2),
    )


@pytest.fixture(scope="session")
def pairs_a(problem_a):
    lo, hi, grid = CFG_A_WINDOW
    return compute_eigenpairs(problem_a, lo, hi, grid, k=40)


@pytest.fixture(scope="session")
def pairs_b(problem_b):
    lo, hi, grid = CFG_B_WINDOW
    return compute_eigenpairs(problem_b, lo, hi, grid, k=10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
