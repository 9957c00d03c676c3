import numpy as np
import pytest

from modelsets import _backend
from modelsets.cutproject import Scheme, Window
from modelsets.lattice import Grid
from modelsets.numfield import NumberField, OrderBasis, minkowski_lattice

PHI = (1 + 5**0.5) / 2


def fibonacci():
    grid = minkowski_lattice(OrderBasis.power_basis(NumberField((-1, -1, 1))), 1)
    return Scheme(1, 1), grid, Window.box([0.0], [1.0])


def ammann_beenker():
    grid = minkowski_lattice(OrderBasis.power_basis(NumberField((-2, 0, 1))), 2)
    return Scheme(2, 2), grid, Window.box([0.0, 0.0], [1.0, 1.0])


def control_zn(d=2):
    return Scheme(d, 0), Grid.standard(d), Window.whole()


@pytest.fixture
def fib():
    return fibonacci()


@pytest.fixture
def ab():
    return ammann_beenker()


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    previous = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(previous)


def random_sl(rng, d, scale=1.0):
    """Product of random elementary matrices, det exactly 1 up to rounding."""
    g = np.eye(d)
    for _ in range(3 * d):
        i, j = rng.choice(d, 2, replace=False)
        E = np.eye(d)
        E[i, j] = rng.uniform(-scale, scale)
        g = E @ g
    return g
