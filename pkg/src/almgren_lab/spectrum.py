"""Galerkin discretization of the angular operator (-i grad_S + A)^2 - a on S^2.

The operator's generalized eigenpairs give the angular spectrum ``mu_k``,
the eigenfunctions ``psi_k`` used as the Fourier basis for solutions, and
the indicial roots ``sigma_k^{+-}`` of the radial problem.
"""

import csv
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.interpolate import RegularGridInterpolator

from .errors import (
    AccuracyWarning,
    DiscretizationFailure,
    InvalidArgumentError,
    InvalidPotentialError,
    PositivityViolation,
)
from .sphere import SpectralBasis, SphereQuadrature, build_quadrature, to_angles

CLUSTER_GAP = 1e-8
PD_GUARD = 1e-12
TRANSVERSALITY_TOL = 1e-12


def hardy_constant(N):
    """((N-2)/2)^2, the threshold of the positivity assumption."""
    return ((N - 2) / 2.0) ** 2


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class AngularPotential:
    """Angular coefficients A (tangent vector field) and a (scalar) on S^{N-1}.

    Samplers take unit vectors of shape ``(n, N)`` and return ``(n, N)``
    resp. ``(n,)`` arrays.  ``gauge`` optionally holds the ambient function
    phi when A contains a pure-gradient part grad_S phi.
    """

    dimension: int
    A_sampler: Callable
    a_sampler: Callable
    smoothness_tag: str = "C1"
    label: str = "custom"
    params: dict = field(default_factory=dict)
    gauge: Callable = None

    def __post_init__(self):
        if self.dimension < 3:
            raise InvalidArgumentError("dimension must be >= 3")

    def check(self, nodes):
        """Validate transversality and boundedness on a node set."""
        A = np.asarray(self.A_sampler(nodes), dtype=float)
        a = np.asarray(self.a_sampler(nodes), dtype=float)
        radial = np.abs(np.einsum("ij,ij->i", A, nodes))
        bound = TRANSVERSALITY_TOL * (1.0 + np.linalg.norm(A, axis=1))
        if np.any(radial > bound):
            j = int(np.argmax(radial - bound))
            raise InvalidPotentialError(
                f"A(theta).theta = {radial[j]:.3e} at node {j}: A is not tangent to the sphere"
            )
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(A)):
            raise InvalidPotentialError("potential is not bounded on the node set")
        return A, a


def _zero_vector(theta):
    return np.zeros_like(np.asarray(theta, dtype=float))


def _zero_scalar(theta):
    return np.zeros(np.asarray(theta).shape[0])


def _tangential(theta, vec):
    return vec - np.einsum("ij,ij->i", vec, theta)[:, None] * theta


# ambient gauge functions phi(x) and their gradients, by id
GAUGE_FUNCTIONS = {
    0: (lambda x: 0.5 * x[:, 2], lambda x: np.stack([0 * x[:, 0], 0 * x[:, 0], 0.5 + 0 * x[:, 0]], 1)),
    1: (lambda x: 0.4 * x[:, 0] * x[:, 1], lambda x: np.stack([0.4 * x[:, 1], 0.4 * x[:, 0], 0 * x[:, 0]], 1)),
    2: (
        lambda x: 0.3 * np.sin(x[:, 0]) + 0.2 * x[:, 2] ** 2,
        lambda x: np.stack([0.3 * np.cos(x[:, 0]), 0 * x[:, 0], 0.4 * x[:, 2]], 1),
    ),
}


def zero_potential(N=3):
    return AngularPotential(N, _zero_vector, _zero_scalar, "C-infinity", "zero", {})


def constant_a(c, N=3):
    c = float(c)
    return AngularPotential(
        N, _zero_vector, lambda th: np.full(np.asarray(th).shape[0], c), "C-infinity", "constant_a", {"c": c}
    )


def rotation_A(alpha, c=0.0, N=3):
    """A(theta) = alpha * (-theta_2, theta_1, 0), optionally with a = c."""
    if N != 3:
        raise InvalidArgumentError("rotation_A is defined on S^2")
    alpha, c = float(alpha), float(c)

    def A(theta):
        theta = np.asarray(theta, dtype=float)
        return alpha * np.stack([-theta[:, 1], theta[:, 0], np.zeros(theta.shape[0])], axis=1)

    return AngularPotential(
        N, A, lambda th: np.full(np.asarray(th).shape[0], c), "C-infinity", "rotation_A", {"alpha": alpha, "c": c}
    )


def gradient_gauge(phi_id, base=None):
    """Add the tangential gradient of a built-in smooth phi to ``base``."""
    if phi_id not in GAUGE_FUNCTIONS:
        raise InvalidArgumentError(f"unknown gauge function id {phi_id}")
    base = base or zero_potential()
    phi, dphi = GAUGE_FUNCTIONS[phi_id]

    def A(theta):
        theta = np.asarray(theta, dtype=float)
        return base.A_sampler(theta) + _tangential(theta, dphi(theta))

    def gauge(theta):
        g = phi(np.asarray(theta, dtype=float))
        if base.gauge is not None:
            g = g + base.gauge(theta)
        return g

    params = dict(base.params, phi_id=phi_id, base=base.label)
    return AngularPotential(base.dimension, A, base.a_sampler, "C-infinity", "gradient_gauge", params, gauge)


def load_potential_table(path):
    """Tabulated potential on a colatitude/longitude grid.

    Plain-text rows ``colatitude longitude A_theta A_phi a`` (radians,
    ``#`` comments).  A is given in its spherical components, so the
    interpolated field is tangent by construction.
    """
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 5:
        raise InvalidPotentialError(f"{path}: expected 5 columns, found {data.shape[1]}")
    colat = np.unique(data[:, 0])
    lon = np.unique(data[:, 1])
    if colat.size * lon.size != data.shape[0]:
        raise InvalidPotentialError(f"{path}: rows do not form a full colatitude x longitude grid")
    order = np.lexsort((data[:, 1], data[:, 0]))
    grid = data[order, 2:].reshape(colat.size, lon.size, 3)
    if not np.all(np.isfinite(grid)):
        raise InvalidPotentialError(f"{path}: non-finite entries")
    # periodic closure in longitude
    lon_ext = np.concatenate([lon[-1:] - 2 * np.pi, lon, lon[:1] + 2 * np.pi])
    grid_ext = np.concatenate([grid[:, -1:], grid, grid[:, :1]], axis=1)
    method = "cubic" if min(colat.size, lon.size) >= 4 else "linear"
    interp = RegularGridInterpolator((colat, lon_ext), grid_ext, method=method, bounds_error=False, fill_value=None)

    def sample(theta):
        c, p = to_angles(theta)
        p = np.where(p < lon_ext[1], p + 2 * np.pi, p)
        p = np.where(p > lon_ext[-2], p - 2 * np.pi, p)
        return interp(np.stack([c, p], axis=-1))

    def A(theta):
        theta = np.asarray(theta, dtype=float)
        vals = sample(theta)
        c, p = to_angles(theta)
        e_theta = np.stack([np.cos(c) * np.cos(p), np.cos(c) * np.sin(p), -np.sin(c)], axis=1)
        e_phi = np.stack([-np.sin(p), np.cos(p), np.zeros_like(p)], axis=1)
        return vals[:, 0, None] * e_theta + vals[:, 1, None] * e_phi

    def a(theta):
        return sample(np.asarray(theta, dtype=float))[:, 2]

    return AngularPotential(3, A, a, "tabulated", "table", {"table": str(path)})


# ---------------------------------------------------------------------------
# assembly


class AngularForms(NamedTuple):
    Q: np.ndarray
    M: np.ndarray
    asymmetry: float


def assemble_forms(pot, basis, quad, threads=1):
    """Stiffness ``Q`` and mass ``M`` of the angular quadratic form.

    ``Q[m, n] = int (-i grad psi_n + A psi_n) . conj(-i grad psi_m + A psi_m)
    - a psi_n conj(psi_m)``.  Both matrices are symmetrized; the largest
    pre-symmetrization deviation is returned as a quadrature-quality metric.
    """
    if quad.exactness_degree < 2 * basis.degree_cap + 2:
        warnings.warn(
            f"quadrature exact to degree {quad.exactness_degree} < 2L+2 = {2 * basis.degree_cap + 2}",
            AccuracyWarning,
            stacklevel=2,
        )
    A, a = pot.check(quad.nodes)

    def partial(sl):
        nodes, w = quad.nodes[sl], quad.weights[sl]
        Y = basis.values(nodes)
        G = basis.gradients(nodes)
        B = -1j * G + A[sl, None, :] * Y[..., None]
        Qp = np.zeros((basis.count, basis.count), dtype=complex)
        for c in range(3):
            Bc = B[..., c]
            Qp += (Bc.conj().T * w) @ Bc
        Yw = Y.conj().T * w
        Qp -= (Yw * a[sl]) @ Y
        return Qp, Yw @ Y

    n_chunks = max(1, int(threads))
    bounds = np.linspace(0, quad.size, n_chunks + 1).astype(int)
    slices = [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    if len(slices) == 1:
        parts = [partial(slices[0])]
    else:
        with ThreadPoolExecutor(len(slices)) as pool:
            parts = list(pool.map(partial, slices))
    Q = sum(p[0] for p in parts)
    M = sum(p[1] for p in parts)
    asym = max(np.abs(Q - Q.conj().T).max(), np.abs(M - M.conj().T).max())
    Q = 0.5 * (Q + Q.conj().T)
    M = 0.5 * (M + M.conj().T)
    return AngularForms(Q, M, float(asym))


# ---------------------------------------------------------------------------
# eigensolve


@dataclass(frozen=True)
class AngularSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual_norms: np.ndarray
    dimension: int
    basis: SpectralBasis
    clusters: tuple

    @property
    def count(self):
        return self.eigenvalues.size

    @property
    def pd_margin(self):
        return float(self.eigenvalues[0] + hardy_constant(self.dimension))

    @cached_property
    def indicial_roots(self):
        return indicial_roots(self, self.dimension)

    @property
    def sigma_plus(self):
        return self.indicial_roots[:, 0]

    @property
    def sigma_minus(self):
        return self.indicial_roots[:, 1]

    def cluster_of(self, k):
        """Indices of the degenerate cluster containing (0-based) index ``k``."""
        for c in self.clusters:
            if k in c:
                return c
        raise InvalidArgumentError(f"index {k} outside the retained spectrum")

    def psi_values(self, theta, K=None):
        V = self.eigenvectors[:, :K]
        return self.basis.values(theta) @ V

    def psi_gradients(self, theta, K=None):
        V = self.eigenvectors[:, :K]
        return np.einsum("pnc,nk->pkc", self.basis.gradients(theta), V)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "mu_k", "sigma_plus", "sigma_minus", "residual"])
        h2 = hardy_constant(self.dimension)
        for k, (mu, res) in enumerate(zip(self.eigenvalues, self.residual_norms), start=1):
            if mu + h2 > PD_GUARD:
                s = np.sqrt(h2 + mu)
                sp, sm = f"{-np.sqrt(h2) + s:.15e}", f"{-np.sqrt(h2) - s:.15e}"
            else:
                sp = sm = ""
            w.writerow([k, f"{mu:.15e}", sp, sm, f"{res:.3e}"])
        return buf.getvalue()


def _clusters(mu, gap):
    groups, start = [], 0
    for i in range(1, mu.size + 1):
        if i == mu.size or mu[i] - mu[i - 1] >= gap:
            groups.append(tuple(range(start, i)))
            start = i
    return groups


def _canonical_cluster_basis(V, M):
    """Deterministic M-orthonormal basis of span(V), independent of LAPACK's choice."""
    m = V.shape[1]
    P = V @ (V.conj().T @ M)  # M-orthogonal projector onto span(V)
    col_norms = np.sqrt(np.abs(np.einsum("ij,ij->j", P.conj(), M @ P)))
    tau = 0.5
    while True:
        chosen = []
        for j in np.flatnonzero(col_norms >= tau * col_norms.max()):
            v = P[:, j].copy()
            for q in chosen:
                v -= q * (q.conj() @ (M @ v))
            nv = np.sqrt(abs(v.conj() @ (M @ v)))
            if nv >= tau * col_norms.max():
                chosen.append(v / nv)
            if len(chosen) == m:
                return np.stack(chosen, axis=1)
        tau *= 0.5
        if tau < 1e-8:
            raise DiscretizationFailure("could not canonicalize a degenerate eigenspace")


def _fix_phase(v):
    mag = np.abs(v)
    j = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])
    return v * (np.conj(v[j]) / mag[j])


def solve_spectrum(Q, M, k_max, N=3, basis=None):
    """First ``k_max`` generalized eigenpairs ``Q c = mu M c``, sorted ascending.

    Within degenerate clusters (gap below 1e-8) eigenvectors are replaced by a
    canonical M-orthonormal basis and phase-fixed so that the largest
    coefficient is real and positive.
    """
    Q = np.asarray(Q)
    M = np.asarray(M)
    n = Q.shape[0]
    if not 1 <= k_max <= n:
        raise InvalidArgumentError(f"k_max={k_max} must lie in [1, {n}]")
    m_min = sla.eigvalsh(M, subset_by_index=[0, 0])[0]
    if m_min <= 1e-12:
        raise DiscretizationFailure(f"mass matrix not positive definite (min eigenvalue {m_min:.3e})")
    mu, V = sla.eigh(Q, M)
    groups = _clusters(mu, CLUSTER_GAP)
    for g in groups:
        idx = list(g)
        if len(idx) > 1:
            V[:, idx] = _canonical_cluster_basis(V[:, idx], M)
        for i in idx:
            V[:, i] = _fix_phase(V[:, i])
    mu, V = mu[:k_max], V[:, :k_max]
    resid = np.linalg.norm(Q @ V - (M @ V) * mu, axis=0)
    kept = tuple(tuple(i for i in g if i < k_max) for g in groups if g[0] < k_max)
    if basis is None:
        L = int(round(np.sqrt(n))) - 1
        basis = SpectralBasis(L)
    return AngularSpectrum(mu, V, resid, N, basis, kept)


def compute_spectrum(pot, L, k_max=None, resolution=None, threads=1):
    """Convenience pipeline: quadrature, basis, assembly and eigensolve."""
    basis = SpectralBasis(L)
    quad = build_quadrature(pot.dimension, resolution or default_resolution(L))
    forms = assemble_forms(pot, basis, quad, threads=threads)
    spec = solve_spectrum(forms.Q, forms.M, k_max or basis.count, pot.dimension, basis)
    return spec, quad, forms


def default_resolution(L):
    # generous: non-polynomial potentials need more than the 2L+2 minimum
    return 2 * L + 12


# ---------------------------------------------------------------------------
# indicial roots and positivity


def indicial_roots(spectrum, N):
    """Pairs (sigma_k^+, sigma_k^-) = -(N-2)/2 +- sqrt(((N-2)/2)^2 + mu_k)."""
    mu = spectrum.eigenvalues if isinstance(spectrum, AngularSpectrum) else np.atleast_1d(np.asarray(spectrum, float))
    h2 = hardy_constant(N)
    margin = mu + h2
    if np.any(margin <= PD_GUARD):
        k = int(np.argmin(margin))
        raise PositivityViolation(
            f"mu_{k + 1} = {mu[k]:.12g} <= -((N-2)/2)^2 = {-h2:.12g}: positive definiteness fails"
        )
    half = (N - 2) / 2.0
    s = np.sqrt(margin)
    return np.stack([-half + s, -half - s], axis=1)


def check_positive_definiteness(spectrum, N):
    """(ok, margin) with ok iff mu_1 > -((N-2)/2)^2.

    By the known equivalence this also decides whether Lambda(A, a) < 1;
    Lambda itself is not computed.
    """
    margin = float(spectrum.eigenvalues[0] + hardy_constant(N))
    return margin > PD_GUARD, margin


def qlim(lambda_value, N):
    """Summability threshold (2*/2) min(4/Lambda - 2, 2*), or (2*)^2/2 at Lambda = 0."""
    if not 0.0 <= lambda_value < 1.0:
        raise InvalidArgumentError(f"Lambda must lie in [0, 1), got {lambda_value}")
    crit = 2.0 * N / (N - 2)
    if lambda_value == 0.0:
        return crit**2 / 2.0
    return crit / 2.0 * min(4.0 / lambda_value - 2.0, crit)
