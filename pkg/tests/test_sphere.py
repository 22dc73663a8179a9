import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almgren_lab.errors import InvalidArgumentError, UnsupportedDimensionError
from almgren_lab.sphere import SpectralBasis, build_quadrature, from_angles, sphere_area, to_angles


def test_weights_sum_to_area():
    q = build_quadrature(3, 16)
    assert abs(q.weights.sum() - 4 * np.pi) <= 1e-13 * 4 * np.pi
    assert np.all(q.weights > 0)
    assert np.max(np.abs(np.linalg.norm(q.nodes, axis=1) - 1)) <= 1e-14


def test_second_moment():
    q = build_quadrature(3, 8)
    assert abs(q.integrate(q.nodes[:, 0] ** 2) - 4 * np.pi / 3) <= 1e-12


def test_y20_normalized():
    q = build_quadrature(3, 24)
    Y = SpectralBasis(2).values(q.nodes)[:, SpectralBasis.index(2, 0)]
    assert abs(q.integrate(np.abs(Y) ** 2) - 1) <= 1e-12


def test_rejections():
    with pytest.raises(UnsupportedDimensionError):
        build_quadrature(4, 8)
    with pytest.raises(InvalidArgumentError):
        build_quadrature(3, 3)


def test_gram_identity():
    q = build_quadrature(3, 20)
    Y = SpectralBasis(8).values(q.nodes)
    G = (Y.conj().T * q.weights) @ Y
    assert np.max(np.abs(G - np.eye(G.shape[0]))) <= 1e-10


def test_sphere_area_values():
    assert sphere_area(3) == pytest.approx(4 * np.pi)
    assert sphere_area(4) == pytest.approx(2 * np.pi**2)


def test_surface_gradient_of_linear_harmonic():
    # Y_1^0 = sqrt(3/4pi) z, surface gradient = sqrt(3/4pi) (e_z - z theta)
    q = build_quadrature(3, 8)
    th = q.nodes
    G = SpectralBasis(1).gradients(th)[:, SpectralBasis.index(1, 0)]
    c = np.sqrt(3 / (4 * np.pi))
    expected = c * (np.array([0, 0, 1.0]) - th[:, 2:3] * th)
    assert np.max(np.abs(G - expected)) <= 1e-13


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6))
def test_monomial_exactness(a, b, c):
    """Product rule integrates x^a y^b z^c exactly up to its degree."""
    from scipy.special import gamma

    res = 8
    if a + b + c > 2 * res - 1:
        return
    q = build_quadrature(3, res)
    x = q.nodes
    num = q.integrate(x[:, 0] ** a * x[:, 1] ** b * x[:, 2] ** c)
    if a % 2 or b % 2 or c % 2:
        exact = 0.0
    else:
        B = lambda *p: np.prod([gamma((v + 1) / 2) for v in p]) / gamma(sum((v + 1) / 2 for v in p))
        exact = 2 * B(a, b, c)
    assert abs(num - exact) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, np.pi - 0.01), st.floats(0, 2 * np.pi - 1e-9))
def test_angle_roundtrip(colat, lon):
    th = from_angles(np.array([colat]), np.array([lon]))
    c2, l2 = to_angles(th)
    assert c2[0] == pytest.approx(colat, abs=1e-12)
    assert np.cos(l2[0] - lon) == pytest.approx(1.0, abs=1e-12)
