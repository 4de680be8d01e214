import numpy as np
import pytest

from secondgrade import spectral as sp


@pytest.fixture(scope="session")
def grid16():
    return sp.make_grid(16, 2 * np.pi)


@pytest.fixture(scope="session")
def grid32():
    return sp.make_grid(32, 24.0)


@pytest.fixture(scope="session")
def grid48():
    return sp.make_grid(48, 32.0)


def random_field(grid, seed, components=3):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((components,) + grid.shape)
