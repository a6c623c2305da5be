import numpy as np
import pytest

from fracburgers.fields import make_grid
from fracburgers.solver import SolverConfig, run

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


@pytest.fixture(scope="session")
def critical_run():
    """Short critical run of a bump on a length-32 torus."""
    g = make_grid(1, 256, 32.0)
    f = g.from_function(lambda x: 1.5 * np.exp(-(x - 16) ** 2 / 2) - 0.5 * np.exp(-(x - 10) ** 2))
    return run(f, SolverConfig(dt=1e-2, t_end=1.0))
