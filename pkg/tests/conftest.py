import numpy as np
import pytest

from diraclimit.inequalities import random_field
from diraclimit.nonlinearity import build_potentials
from diraclimit.spectral import GridSpec, PhysParams, norm


@pytest.fixture(scope="session")
def grid16():
    return GridSpec(16, 12.0)


@pytest.fixture(scope="session")
def params():
    return PhysParams(c=4.0)


@pytest.fixture(scope="session")
def pot16(grid16, params):
    return build_potentials(grid16, params)


@pytest.fixture
def rand_spinor():
    """Band-limited random field normalized in L^2."""

    def make(grid, seed=0, components=4, cutoff=2 / 3):
        u = random_field(seed, grid, cutoff, components)
        return u / norm(u, grid)

    return make


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
