import numpy as np
import pytest

from bogoflow import BoundarySpec, Domain, flrw_torus, static_spacetime
from bogoflow.spectral import OperatorSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture
def unit_torus():
    """Static 1-torus of unit length, massive so the zero mode is regular."""
    return flrw_torus(lambda t: 1.0, lambda t: 0.0, length=1.0, mass=1.0)


@pytest.fixture
def long_torus():
    """Static torus with the cosmology-scenario scales (L = 1000, m = 0.1)."""
    return flrw_torus(lambda t: 1.0, lambda t: 0.0, length=1000.0, mass=0.1)


@pytest.fixture
def unit_box():
    return static_spacetime(Domain((1.0, 1.0, 1.0), (False,) * 3),
                            boundary=BoundarySpec("dirichlet"))


def make_operator(st, **kwargs):
    return OperatorSpec(boundary=st.boundary, **kwargs)
