import numpy as np
import pytest

from lorfem.mesh import build_cart_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def sheared_mesh_2d():
    """Graded, sheared 2D mesh exercising non-diagonal Jacobians."""
    return build_cart_mesh(2, [2, 3], [(0.0, 1.0), (-0.5, 1.5)], [1.0, 1.4], [[1.0, 0.3], [0.1, 1.2]])


@pytest.fixture
def sheared_mesh_3d():
    return build_cart_mesh(3, [2, 1, 2], None, [1.3, 1.0, 0.8], [[1.0, 0.2, 0.0], [0.0, 1.1, 0.1], [0.1, 0.0, 0.9]])
