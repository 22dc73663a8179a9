import warnings

import numpy as np
import pytest

from almgren_lab.errors import TailWarning
from almgren_lab.field import inverse_square_eps, solve_perturbed
from almgren_lab.radial import RadialGrid
from almgren_lab.spectrum import compute_spectrum, zero_potential


@pytest.fixture(scope="session")
def base():
    """Spectrum of the free operator (L=6), its quadrature and the default grid."""
    spec, quad, forms = compute_spectrum(zero_potential(), 6)
    return spec, quad, RadialGrid.default(1.0)


@pytest.fixture(scope="session")
def perturbed(base):
    """h = 0.1 r^{-3/2}, data on modes 1 and 3."""
    spec, quad, grid = base
    h = inverse_square_eps(0.1, 0.5)
    fld = solve_perturbed(spec, h, {1: 1.0, 3: 0.5}, grid, quad, 16)
    return fld, h


@pytest.fixture(autouse=True)
def _quiet_tails():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(42)
