import numpy as np
import pytest

from dformlab.spectral import Grid


@pytest.fixture(scope="session")
def grid32() -> Grid:
    return Grid(32, 2.0 * np.pi)


@pytest.fixture(scope="session")
def grid64() -> Grid:
    return Grid(64, 2.0 * np.pi)


@pytest.fixture(scope="session")
def grid128() -> Grid:
    return Grid(128, 2.0 * np.pi)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20260825)
