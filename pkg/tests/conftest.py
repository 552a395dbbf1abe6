import numpy as np
import pytest

from nlslab.grid import Grid2D
from nlslab.operators import build_operator
from nlslab.potentials import PotentialSpec


@pytest.fixture(scope="session")
def grid32():
    return Grid2D(32, 8.0)


@pytest.fixture(scope="session")
def bump():
    return PotentialSpec.gaussian_bump(1.0, 1.0)


@pytest.fixture(scope="session")
def op32(grid32, bump):
    """Dense ``-Delta + V`` for the unit Gaussian bump on the 32 x 32 grid."""
    return build_operator(grid32, bump, "dense")


@pytest.fixture(scope="session")
def free32(grid32):
    return build_operator(grid32, PotentialSpec.zero())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_field(grid, rng, width=1.5):
    """Random smooth localized field: a modulated Gaussian with a random centre."""
    c = rng.uniform(-1, 1, 2)
    k = rng.uniform(-1, 1, 2)
    return grid.gaussian(width, tuple(c)) * np.exp(1j * (k[0] * grid.X + k[1] * grid.Y))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(lines):
        terminalreporter.write_line(lines[num])
