import numpy as np
import pytest

from moyal_scatter.clifford import build_dirac_rep, build_model
from moyal_scatter.dynamics import PotentialProfile, build_spectral
from moyal_scatter.lattice import GridFunction, SpatialGrid, gaussian

ACCEPTANCE_KEY = pytest.StashKey[dict]()


class Small:
    """A small grid with its model, spectral data and a potential profile."""

    def __init__(self, q, p, theta, box, points, kind="V0", amplitude=1.0):
        self.model = build_model(q, p, theta, 1.0)
        self.dirac = build_dirac_rep(self.model)
        self.grid = SpatialGrid(box, points, self.model.s)
        self.spectral = build_spectral(self.model, self.grid, self.dirac)
        b = gaussian(self.grid, 1.0, 1.0).values.real.astype(complex)
        self.profile = PotentialProfile(0.0, 1.0, amplitude, GridFunction(self.grid, b), kind)


@pytest.fixture(scope="session")
def line():
    return Small(2, 0, 0.0, 20.0, 32)


@pytest.fixture(scope="session")
def plane():
    return Small(1, 2, 0.5, 8.0, 10, kind="Vi")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(lines):
            terminalreporter.write_line(lines[num])
