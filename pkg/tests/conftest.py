import numpy as np
import pytest

from pneumann.geometry import build_annulus_mesh, build_cusp_mesh


@pytest.fixture(scope="session")
def annulus():
    return build_annulus_mesh(1.0, 4.0, 8, 32)


@pytest.fixture(scope="session")
def small_cusp():
    return build_cusp_mesh(0.75, 0.5, 64.0, 56, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
