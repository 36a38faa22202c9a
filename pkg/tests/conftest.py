import numpy as np
import pytest

from doublephase.mesh import build_disc_mesh, build_rect_mesh


@pytest.fixture(scope="session")
def unit_mesh():
    return build_rect_mesh(0.0, 0.0, 1.0, 1.0, 8, 8)


@pytest.fixture(scope="session")
def unit_mesh32():
    return build_rect_mesh(0.0, 0.0, 1.0, 1.0, 32, 32)


@pytest.fixture(scope="session")
def disc6():
    return build_disc_mesh((0.0, 0.0), 2.0, 6)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
