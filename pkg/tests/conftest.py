import numpy as np
import pytest

from gridnls.functions import build_mesh
from gridnls.grid import GridSpec, build_grid


def make_mesh(dim=3, radius=2, n=8, ell=1.0, boundary="dirichlet"):
    return build_mesh(build_grid(GridSpec(dim, ell, radius, boundary)), n)


@pytest.fixture(scope="session")
def mesh3():
    return make_mesh()


@pytest.fixture(scope="session")
def small_mesh():
    return make_mesh(radius=2, n=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
