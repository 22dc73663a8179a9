"""Leading-term coefficients, blow-up traces and the pointwise bound.

The coefficient of ``psi_i`` in the blow-up limit ``lambda^{-gamma} u(lambda theta)``
is recovered from data on a single sphere of radius R plus a weighted
radial integral of the forcing ``zeta_i`` of the mode equation:

    beta_i = phi_i(R) / R^gamma
           + int_0^R zeta_i(s) (s^{1-gamma} - s^{gamma+N-1} / R^{2 gamma+N-2}) ds / (2 gamma + N - 2)

The value does not depend on R when u solves the equation, which gives a
strong consistency check.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import radial
from .errors import InvalidArgumentError, InvalidExponent
from .field import forcing_on_grid
from .frequency import match_indicial_root


@dataclass(frozen=True)
class LeadingTerm:
    gamma: float
    k0: int  # 1-based
    eigenspace: tuple  # 1-based indices
    betas: np.ndarray
    R_used: float
    all_betas: np.ndarray = field(repr=False, default=None)
    tail_contribution: float = 0.0
    boundary_norm: float = 1.0

    @property
    def nontrivial(self):
        return bool(np.max(np.abs(self.betas)) > 1e-8 * self.boundary_norm)

    def limit_profile(self, spectrum, theta):
        """sum_i beta_i psi_i(theta)."""
        idx = np.asarray(self.eigenspace) - 1
        psi = spectrum.psi_values(theta, idx.max() + 1)[:, idx]
        return psi @ self.betas

    def to_dict(self):
        return {
            "gamma": float(self.gamma),
            "k0": int(self.k0),
            "eigenspace": [int(i) for i in self.eigenspace],
            "betas": [[float(b.real), float(b.imag)] for b in self.betas],
            "R_used": float(self.R_used),
            "tail_contribution": float(self.tail_contribution),
            "nontrivial": self.nontrivial,
        }


def leading_index(spectrum, gamma):
    """Snap gamma to the nearest sigma^+ and return (sigma, k0, cluster), 1-based."""
    k0, _ = match_indicial_root(spectrum, gamma)
    cluster = spectrum.cluster_of(k0)
    return float(spectrum.sigma_plus[k0]), cluster[0] + 1, tuple(i + 1 for i in cluster)


def beta_all_modes(fld, h, g, gamma, R, zeta=None):
    """Coefficient formula applied to every retained mode; returns (betas, tail)."""
    N = fld.N
    kappa = 2 * gamma + N - 2
    if kappa <= 0:
        raise InvalidExponent(f"2 gamma + N - 2 = {kappa:.3g} must be positive")
    grid = fld.grid
    if not (grid.r_min < R <= grid.R * (1 + 1e-12)):
        raise InvalidArgumentError(f"R={R} outside the radial grid")
    lam = grid.nodes[:, None]
    if zeta is None:
        zeta = forcing_on_grid(fld, h, g)
    # integrals in t = log s carry an extra factor s
    inner = radial.RadialIntegral(grid, lam ** (2 - gamma) * zeta, warn=True)
    outer = radial.RadialIntegral(grid, lam ** (gamma + N) * zeta, warn=True)
    R = min(R, grid.R)
    integral = (inner(R) - R ** (-kappa) * outer(R)) / kappa
    tail = (inner.tail - R ** (-kappa) * outer.tail) / kappa
    phiR = fld.modes(R)[0]
    return phiR / R**gamma + integral, float(np.max(np.abs(tail)))


def extract_beta(fld, h, g, spectrum, eigenspace=None, R=None, gamma=None, zeta=None):
    """Leading coefficients on the eigenspace of the snapped exponent.

    ``gamma`` defaults to the indicial root of the first mode carrying
    data; ``eigenspace`` (1-based) defaults to the degenerate cluster of
    the nearest sigma^+.
    """
    R = fld.grid.R if R is None else float(R)
    if gamma is None:
        active = np.flatnonzero(np.abs(fld.W).max(axis=0) > 0)
        if active.size == 0:
            raise InvalidArgumentError("zero field has no leading term")
        gamma = spectrum.sigma_plus[active[0]]
    sigma, k0, cluster = leading_index(spectrum, gamma)
    eigenspace = tuple(cluster if eigenspace is None else eigenspace)
    if max(eigenspace) > fld.K or min(eigenspace) < 1:
        raise InvalidArgumentError("eigenspace indices outside the field's modes")
    betas, tail = beta_all_modes(fld, h, g, sigma, R, zeta)
    idx = np.asarray(eigenspace) - 1
    norm = float(np.sqrt(np.sum(np.abs(fld.modes(R)[0]) ** 2)))
    return LeadingTerm(sigma, k0, eigenspace, betas[idx], R, betas, tail, norm)


def beta_R_independence(fld, h, g, spectrum, radii, gamma=None):
    """Max pairwise deviation of beta across radii, relative to max |beta|."""
    zeta = forcing_on_grid(fld, h, g)
    terms = [extract_beta(fld, h, g, spectrum, R=R, gamma=gamma, zeta=zeta) for R in radii]
    B = np.stack([t.betas for t in terms])
    ref = np.max(np.abs(B))
    dev = max(np.max(np.abs(B[i] - B[j])) for i in range(len(B)) for j in range(i + 1, len(B)))
    return dev / ref, terms


# ---------------------------------------------------------------------------
# blow-up traces


@dataclass(frozen=True)
class TraceReport:
    lambdas: np.ndarray
    e0: np.ndarray
    e1: np.ndarray
    rate0: float
    rate1: float

    @property
    def monotone0(self):
        return bool(np.all(np.diff(self.e0) <= 0))

    @property
    def monotone1(self):
        return bool(np.all(np.diff(self.e1) <= 0))

    def to_dict(self):
        return {
            "lambda": [float(v) for v in self.lambdas],
            "e0": [float(v) for v in self.e0],
            "e1": [float(v) for v in self.e1],
            "monotone_e0": self.monotone0,
            "monotone_e1": self.monotone1,
            "rate_e0": _finite(self.rate0),
            "rate_e1": _finite(self.rate1),
        }


def _finite(v):
    return float(v) if np.isfinite(v) else None


def _rate(lam, e):
    """Exponent p of e ~ C lambda^p; nan when the errors are at roundoff."""
    ok = e > 1e-14
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(lam[ok]), np.log(e[ok]), 1)[0])


def blowup_trace(fld, lambdas, gamma, leading):
    """Sup-norm distance of the rescaled traces to the blow-up limit.

    ``e0`` compares ``lambda^{-gamma} u(lambda theta)`` with
    ``sum beta_i psi_i`` and ``e1`` compares ``lambda^{1-gamma} grad u`` with
    ``sum beta_i (gamma psi_i theta + grad_S psi_i)`` on the quadrature nodes.
    Lambdas are sorted decreasing.
    """
    lam = np.sort(np.asarray(lambdas, dtype=float))[::-1]
    fld.grid.require(lam)
    theta = fld.quad.nodes
    K = fld.K
    psi, dpsi = fld.psi_nodes, fld.psi_grad_nodes
    idx = np.asarray(leading.eigenspace) - 1
    beta = np.zeros(K, dtype=complex)
    beta[idx] = leading.betas
    limit = psi @ beta
    limit_grad = gamma * limit[:, None] * theta + np.einsum("nkc,k->nc", dpsi, beta)
    phi = fld.modes(lam) * lam[:, None] ** -gamma
    dphi = fld.mode_derivatives(lam) * lam[:, None] ** (1 - gamma)
    e0 = np.max(np.abs(phi @ psi.T - limit[None, :]), axis=1)
    # lambda^{1-gamma} grad u = (lambda^{1-gamma} d_r u) theta + lambda^{-gamma} grad_S u
    grad = (dphi @ psi.T)[:, :, None] * theta[None] + np.einsum("lk,nkc->lnc", phi, dpsi)
    e1 = np.max(np.linalg.norm(grad - limit_grad[None], axis=2), axis=1)
    return TraceReport(lam, e0, e1, _rate(lam, e0), _rate(lam, e1))


def halving_sequence(start, stop):
    """start, start/2, ... down to (not below) stop."""
    n = int(np.floor(np.log2(start / stop))) + 1
    return start / 2.0 ** np.arange(n)


# ---------------------------------------------------------------------------
# pointwise bound


@dataclass(frozen=True)
class PointwiseBound:
    C: float
    uniform: bool
    annulus_maxima: np.ndarray

    def to_dict(self):
        return {"C": float(self.C), "uniform": self.uniform, "annulus_maxima": [float(v) for v in self.annulus_maxima]}


def pointwise_bound(fld, gamma, annuli, per_annulus=9):
    """C = max |u(x)| / |x|^gamma over sampled annuli; uniform if no annulus exceeds 1.05 x median."""
    maxima = []
    for lo, hi in annuli:
        if not 0 < lo < hi:
            raise InvalidArgumentError(f"bad annulus ({lo}, {hi})")
        r = np.geomspace(lo, hi, per_annulus)
        U = fld.surface_values(r)
        maxima.append(float(np.max(np.abs(U) / r[:, None] ** gamma)))
    maxima = np.asarray(maxima)
    uniform = bool(np.all(maxima <= 1.05 * np.median(maxima)))
    return PointwiseBound(float(maxima.max()), uniform, maxima)


def decade_annuli(r_lo, r_hi):
    """Consecutive decades covering [r_lo, r_hi]."""
    edges = [r_lo]
    while edges[-1] * 10 < r_hi * (1 - 1e-12):
        edges.append(edges[-1] * 10)
    edges.append(r_hi)
    return list(zip(edges[:-1], edges[1:]))


def report_json(leading, trace=None, bound=None, r_deviation=None):
    out = leading.to_dict()
    if trace is not None:
        out["trace"] = trace.to_dict()
    if bound is not None:
        out["pointwise_bound"] = bound.to_dict()
    if r_deviation is not None:
        out["R_independence_deviation"] = float(r_deviation)
    return json.dumps(out, indent=2, sort_keys=True)
