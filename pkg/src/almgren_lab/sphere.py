"""Quadrature and complex spherical harmonics on the unit sphere S^2.

Harmonics are ordered by ``n = l*l + l + m`` and follow scipy's
normalization (orthonormal in L^2(S^2), Condon-Shortley phase).  Surface
gradients are obtained from the gradient of the solid harmonic
``r**l * Y_l^m``, which is again a combination of solid harmonics of degree
``l - 1``; this avoids the coordinate singularity at the poles.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import sph_harm_y

from .errors import InvalidArgumentError, UnsupportedDimensionError


def sphere_area(N):
    """Surface measure of the unit sphere S^{N-1} in R^N."""
    from math import gamma, pi

    return 2.0 * pi ** (N / 2) / gamma(N / 2)


def to_angles(theta):
    """Unit vectors ``(n, 3)`` -> colatitude and longitude arrays."""
    theta = np.asarray(theta, dtype=float)
    z = np.clip(theta[..., 2], -1.0, 1.0)
    return np.arccos(z), np.arctan2(theta[..., 1], theta[..., 0])


def from_angles(colatitude, longitude):
    s = np.sin(colatitude)
    return np.stack(
        [s * np.cos(longitude), s * np.sin(longitude), np.cos(colatitude)], axis=-1
    )


@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule: Gauss-Legendre in cos(colatitude), uniform in longitude."""

    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    resolution: int

    @property
    def size(self):
        return self.weights.size

    def integrate(self, values, axis=-1):
        """Integrate samples taken on ``nodes`` (node axis given by ``axis``)."""
        values = np.moveaxis(np.asarray(values), axis, -1)
        return values @ self.weights


def build_quadrature(N, resolution):
    """Product quadrature on S^{N-1}; only N = 3 is implemented.

    ``resolution`` Gauss-Legendre nodes in ``z`` and ``2 * resolution``
    equispaced longitudes integrate every polynomial of degree
    ``2 * resolution - 1`` exactly.
    """
    if N != 3:
        raise UnsupportedDimensionError(f"sphere discretization implemented for N=3 only, got N={N}")
    if int(resolution) != resolution or resolution < 4:
        raise InvalidArgumentError(f"resolution must be an integer >= 4, got {resolution}")
    resolution = int(resolution)
    z, wz = np.polynomial.legendre.leggauss(resolution)
    n_lon = 2 * resolution
    lon = 2.0 * np.pi * np.arange(n_lon) / n_lon
    colat = np.arccos(z)
    C, P = np.meshgrid(colat, lon, indexing="ij")
    nodes = from_angles(C.ravel(), P.ravel())
    # renormalize so |theta_j| = 1 to rounding
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]
    weights = np.repeat(wz, n_lon) * (2.0 * np.pi / n_lon)
    return SphereQuadrature(nodes, weights, 2 * resolution - 1, resolution)


def _solid_harmonic_gradient(l, m, values_lm1):
    """Cartesian gradient of r^l Y_l^m at |x| = 1.

    ``values_lm1(m')`` returns Y_{l-1}^{m'} on the evaluation points (zero
    when |m'| > l - 1).
    """
    c = np.sqrt((2 * l + 1) / (2 * l - 1))
    dz = c * np.sqrt((l + m) * (l - m)) * values_lm1(m)
    dplus = c * np.sqrt(max((l - m) * (l - m - 1), 0)) * values_lm1(m + 1)
    dminus = -c * np.sqrt(max((l + m) * (l + m - 1), 0)) * values_lm1(m - 1)
    dx = 0.5 * (dplus + dminus)
    dy = -0.5j * (dplus - dminus)
    return np.stack([dx, dy, dz], axis=-1)


@dataclass(frozen=True)
class SpectralBasis:
    """Complex spherical harmonics on S^2 up to degree ``degree_cap``."""

    degree_cap: int
    degrees: np.ndarray = field(init=False, repr=False)
    orders: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.degree_cap < 0:
            raise InvalidArgumentError("degree_cap must be nonnegative")
        ls = np.concatenate([np.full(2 * l + 1, l) for l in range(self.degree_cap + 1)])
        ms = np.concatenate([np.arange(-l, l + 1) for l in range(self.degree_cap + 1)])
        object.__setattr__(self, "degrees", ls)
        object.__setattr__(self, "orders", ms)

    @property
    def count(self):
        return (self.degree_cap + 1) ** 2

    @staticmethod
    def index(l, m):
        return l * l + l + m

    def _raw_values(self, theta, lmax):
        colat, lon = to_angles(theta)
        out = np.empty(colat.shape + ((lmax + 1) ** 2,), dtype=complex)
        for l in range(lmax + 1):
            for m in range(-l, l + 1):
                out[..., l * l + l + m] = sph_harm_y(l, m, colat, lon)
        return out

    def values(self, theta):
        """Y_n(theta) for unit vectors ``(n_pts, 3)`` -> ``(n_pts, count)``."""
        return self._raw_values(theta, self.degree_cap)

    def gradients(self, theta):
        """Surface gradients, Cartesian components: ``(n_pts, count, 3)``."""
        theta = np.asarray(theta, dtype=float)
        L = self.degree_cap
        Y = self._raw_values(theta, L)
        grads = np.zeros(Y.shape + (3,), dtype=complex)
        for l in range(1, L + 1):

            def lower(mp, l=l):
                if abs(mp) > l - 1:
                    return np.zeros(Y.shape[:-1], dtype=complex)
                return Y[..., (l - 1) ** 2 + (l - 1) + mp]

            for m in range(-l, l + 1):
                n = l * l + l + m
                g = _solid_harmonic_gradient(l, m, lower)
                # tangential part: grad(r^l Y) - l Y theta on the unit sphere
                grads[..., n, :] = g - l * Y[..., n, None] * theta
        return grads

    def fingerprint(self):
        return f"sph-harm-complex-L{self.degree_cap}"
