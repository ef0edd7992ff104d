import numpy as np
import pytest

from besovnet.network_ir import AffineMap, build_network
from besovnet.wavelets1d import cdf_system


def hat_net():
    """Unit hat on [0, 1]: 2ρ(x) − 4ρ(x − 1/2) + 2ρ(x − 1)."""
    first = AffineMap.from_dense([[1.0], [1.0], [1.0]], [0.0, -0.5, -1.0])
    second = AffineMap.from_dense([[2.0, -4.0, 2.0]])
    return build_network(1, [first, second], [[True, True, True]])


def random_net(rng, input_dim=2, widths=(4, 3), output_dim=1, r_class=1, density=0.7):
    dims = [input_dim, *widths, output_dim]
    affines, rects = [], []
    for i in range(len(dims) - 1):
        mat = rng.normal(size=(dims[i + 1], dims[i])) * (rng.random((dims[i + 1], dims[i])) < density)
        affines.append(AffineMap.from_dense(mat, rng.normal(size=dims[i + 1])))
        if i < len(dims) - 2:
            rects.append(rng.random(dims[i + 1]) < 0.8)
    return build_network(input_dim, affines, rects, r_class)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def hat():
    return hat_net()


@pytest.fixture(scope='session')
def cdf22():
    return cdf_system(2, 2)


@pytest.fixture(scope='session')
def cdf33():
    return cdf_system(3, 3)
