"""Perturbation envelopes eta_0, eta_1 and the Pohozaev balance.

The envelopes are suprema of Rayleigh quotients over H^1(B_r)

    eta(r) = sup  int_{B_r} w |u|^2 / Den(u),
    Den(u) = int_{B_r} |grad u + i A u/|x||^2 - a |u|^2/|x|^2 + (N-2)/(2r) int_{dB_r} |u|^2,

with ``w = |h|`` for eta_0 and ``w = |Re(x . grad h)|`` for eta_1.  The
supremum is approximated from below by a Galerkin space: angular
eigenfunctions times cubic B-splines on a geometric mesh of
``[delta r, r]``, extended by their value at ``delta r`` into the inner
ball.  The extension keeps every trial function in H^1(B_r), so each
computed value is a certified lower bound, and because the mesh scales
with r a power-law h gives an exactly power-law envelope.
"""

import csv
import io
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.interpolate import BSpline

from .errors import InconclusiveFit, InvalidArgumentError, NumericFailure, PositivityViolation
from .frequency import FrequencyCalculator

P_THRESHOLD = 0.05
FIT_TOL = 0.20
GAUSS_POINTS = 8


@dataclass(frozen=True)
class BallBasis:
    """Tensor trial space: ``angular_modes`` eigenfunctions x cubic B-splines.

    ``intervals`` geometric intervals cover ``[inner_fraction r, r]``.
    """

    spectrum: object
    quad: object
    angular_modes: int = 9
    intervals: int = 12
    inner_fraction: float = 1e-3
    degree: int = 3

    def __post_init__(self):
        if not 1 <= self.angular_modes <= self.spectrum.count:
            raise InvalidArgumentError("angular_modes outside the retained spectrum")
        if self.intervals < 1 or not 0 < self.inner_fraction < 1:
            raise InvalidArgumentError("need intervals >= 1 and 0 < inner_fraction < 1")

    @property
    def radial_count(self):
        return self.intervals + self.degree

    @property
    def count(self):
        return self.radial_count * self.angular_modes

    def refined(self, angular_modes=None):
        """Nested enlargement: intervals doubled, optionally more angular modes."""
        K = angular_modes or self.angular_modes
        return BallBasis(self.spectrum, self.quad, min(K, self.spectrum.count), 2 * self.intervals, self.inner_fraction, self.degree)

    @cached_property
    def _unit_knots(self):
        breaks = np.geomspace(self.inner_fraction, 1.0, self.intervals + 1)
        k = self.degree
        return np.concatenate([[breaks[0]] * k, breaks, [breaks[-1]] * k])

    @cached_property
    def _unit_splines(self):
        nb = self.radial_count
        sp = BSpline(self._unit_knots, np.eye(nb), self.degree)
        return sp, sp.derivative()

    @cached_property
    def _unit_quadrature(self):
        """Gauss-Legendre nodes and weights on each unit-scale interval."""
        x, w = np.polynomial.legendre.leggauss(GAUSS_POINTS)
        breaks = np.geomspace(self.inner_fraction, 1.0, self.intervals + 1)
        a, b = breaks[:-1, None], breaks[1:, None]
        nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (b + a)
        weights = 0.5 * (b - a) * w[None, :]
        return nodes.ravel(), weights.ravel()

    def radial_tables(self, r):
        """(s, ds-weights, values, derivatives, value at inner radius, value at r)."""
        sp, dsp = self._unit_splines
        u, wu = self._unit_quadrature
        vals = sp(u)
        ders = dsp(u) / r
        return r * u, r * wu, vals, ders, sp(self.inner_fraction), sp(1.0)

    @cached_property
    def angular_mu(self):
        return self.spectrum.eigenvalues[: self.angular_modes]


def _inner_weight_integral(weight, r_in, N, decades=10, per_decade=48):
    """int_0^{r_in} weight(s) s^{N-1} ds on a log grid plus a power-law tail."""
    x, w = np.polynomial.legendre.leggauss(per_decade)
    lo = np.log(r_in) - decades * np.log(10.0)
    hi = np.log(r_in)
    t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    s = np.exp(t)
    total = float(np.sum(0.5 * (hi - lo) * w * weight(s) * s**N))
    # tail below the window from the local exponent at its lower end
    s0 = np.exp(lo)
    g0, g1 = weight(np.array([s0]))[0] * s0**N, weight(np.array([s0 * 1.01]))[0] * (s0 * 1.01) ** N
    if g0 > 0 and g1 > 0:
        q = np.log(g1 / g0) / np.log(1.01)
        if q <= 0:
            return np.inf
        total += g0 / q
    return total


@dataclass(frozen=True)
class BallForms:
    Num0: np.ndarray
    Num1: np.ndarray
    Den: np.ndarray
    radial: dict
    chi_matrix: np.ndarray

    @property
    def separable(self):
        return self.chi_matrix is None


def assemble_ball_forms(pot, h, r, basis):
    """Num0, Num1, Den on the tensor trial space at radius r.

    Angular factors are exact in the eigenbasis (mass identity, stiffness
    diag(mu)); radial factors use Gauss-Legendre on each mesh interval.
    When h has no angular profile the tensor blocks are kept apart in
    ``radial`` for the per-mode fast path.
    """
    if r <= 0:
        raise InvalidArgumentError("radius must be positive")
    N = basis.spectrum.dimension
    if basis.spectrum.pd_margin <= 0:
        raise PositivityViolation("angular operator is not positive definite")
    s, w, b, db, b_in, b_out = basis.radial_tables(r)
    r_in = basis.inner_fraction * r
    S1 = (db * (w * s ** (N - 1))[:, None]).T @ db
    S3 = (b * (w * s ** (N - 3))[:, None]).T @ b + r_in ** (N - 2) / (N - 2) * np.outer(b_in, b_in)
    Bd = 0.5 * (N - 2) * r ** (N - 2) * np.outer(b_out, b_out)
    K = basis.angular_modes
    mu = basis.angular_mu
    R0 = np.zeros_like(S1)
    R1 = np.zeros_like(S1)
    chi_matrix = None
    if h is not None and not h.is_zero:
        w0 = lambda x: np.abs(h.rho(x))
        w1 = lambda x: np.abs(np.real(x * h.drho(x)))
        for R_, wf in ((R0, w0), (R1, w1)):
            R_ += (b * (w * s ** (N - 1) * wf(s))[:, None]).T @ b
            inner = _inner_weight_integral(wf, r_in, N)
            if not np.isfinite(inner):
                raise NumericFailure("perturbation weight not integrable at the origin")
            R_ += inner * np.outer(b_in, b_in)
        if not h.is_radial:
            psi = basis.spectrum.psi_values(basis.quad.nodes, K)
            chi = np.abs(h.chi_values(basis.quad.nodes))
            chi_matrix = (psi.conj() * (chi * basis.quad.weights)[:, None]).T @ psi
            chi_matrix = 0.5 * (chi_matrix + chi_matrix.conj().T)
    eye = np.eye(K)
    C = eye if chi_matrix is None else chi_matrix
    Den = np.kron(S1 + Bd, eye) + np.kron(S3, np.diag(mu))
    Num0 = np.kron(R0, C)
    Num1 = np.kron(R1, C)
    radial = {"S1": S1, "S3": S3, "Bd": Bd, "R0": R0, "R1": R1}
    return BallForms(Num0, Num1, Den, radial, chi_matrix)


def _largest(num, den):
    try:
        sla.cholesky(den)
    except sla.LinAlgError as exc:
        raise PositivityViolation("denominator form not positive definite") from exc
    if not np.any(num):
        return 0.0
    try:
        vals = sla.eigh(num, den, eigvals_only=True)
    except sla.LinAlgError as exc:
        raise NumericFailure(f"generalized eigensolver failed: {exc}") from exc
    return max(float(vals[-1]), 0.0)


def eta(r, which, pot, h, basis):
    """Galerkin lower bound for eta_0 (which=0) or eta_1 (which=1) at radius r."""
    if which not in (0, 1):
        raise InvalidArgumentError("which must be 0 or 1")
    forms = assemble_ball_forms(pot, h, r, basis)
    return _eta_from_forms(forms, which, basis)


def _eta_from_forms(forms, which, basis):
    if forms.separable:
        rad = forms.radial
        num = rad["R0"] if which == 0 else rad["R1"]
        if not np.any(num):
            return 0.0
        # modes decouple: one small problem per angular eigenvalue
        return max(_largest(num, rad["S1"] + rad["Bd"] + m * rad["S3"]) for m in basis.angular_mu)
    return _largest(forms.Num0 if which == 0 else forms.Num1, forms.Den)


# ---------------------------------------------------------------------------
# envelope and hypotheses


@dataclass(frozen=True)
class QuotientEnvelope:
    radii: np.ndarray
    eta0: np.ndarray
    eta1: np.ndarray
    gap0: np.ndarray
    gap1: np.ndarray

    def to_csv(self, report=None):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["r", "eta0", "eta1", "fit_exponent0", "fit_exponent1", "refinement_gap0", "refinement_gap1"])
        p0 = report["eta0"]["exponent"] if report else None
        p1 = report["eta1"]["exponent"] if report else None
        fmt = lambda v: "" if v is None else f"{v:.15e}"
        for i, r in enumerate(self.radii):
            wr.writerow([fmt(r), fmt(self.eta0[i]), fmt(self.eta1[i]), fmt(p0), fmt(p1), fmt(self.gap0[i]), fmt(self.gap1[i])])
        return buf.getvalue()


def compute_envelope(pot, h, radii, basis, refine=True):
    """eta_0, eta_1 at each radius, plus the relative gap to a refined basis."""
    radii = np.asarray(radii, dtype=float)
    fine = basis.refined() if refine else None
    e0, e1, g0, g1 = [], [], [], []
    for r in radii:
        forms = assemble_ball_forms(pot, h, r, basis)
        a0, a1 = _eta_from_forms(forms, 0, basis), _eta_from_forms(forms, 1, basis)
        e0.append(a0)
        e1.append(a1)
        if fine is not None:
            ff = assemble_ball_forms(pot, h, r, fine)
            b0, b1 = _eta_from_forms(ff, 0, fine), _eta_from_forms(ff, 1, fine)
            g0.append(abs(b0 - a0) / b0 if b0 > 0 else 0.0)
            g1.append(abs(b1 - a1) / b1 if b1 > 0 else 0.0)
        else:
            g0.append(np.nan)
            g1.append(np.nan)
    return QuotientEnvelope(radii, np.array(e0), np.array(e1), np.array(g0), np.array(g1))


def fit_power(radii, values):
    """Log-log fit values ~ C r^p; returns (C, p, max relative residual)."""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    p, logC = np.polyfit(np.log(radii), np.log(values), 1)
    C = float(np.exp(logC))
    resid = float(np.max(np.abs(C * radii**p - values) / values))
    return C, float(p), resid


def _verdict(radii, values, with_limit):
    if np.all(values == 0):
        out = {"exponent": None, "constant": 0.0, "fit_residual": 0.0, "vanishes": True,
               "integral_over_s": 0.0, "iterated_integral": 0.0}
        out["holds"] = True
        return out
    if np.any(values <= 0):
        raise InconclusiveFit("envelope has nonpositive samples")
    C, p, resid = fit_power(radii, values)
    if resid > FIT_TOL:
        raise InconclusiveFit(f"power-law fit residual {resid:.1%} exceeds {FIT_TOL:.0%}")
    good = p > P_THRESHOLD
    R = float(np.max(radii))
    out = {
        "exponent": p,
        "constant": C,
        "fit_residual": resid,
        # int_0^R eta/s ds and int_0^R (1/r) int_0^r eta/s ds dr for eta = C r^p
        "integral_over_s": C * R**p / p if good else None,
        "iterated_integral": C * R**p / p**2 if good else None,
        "eta_over_r_integrable": good,
        "iterated_integrable": good,
    }
    if with_limit:
        out["vanishes"] = good
    out["holds"] = good
    return out


def check_eta_hypotheses(envelope):
    """Verdicts for the smallness and integrability conditions on eta_0 and eta_1.

    Each envelope is fitted by C r^p; all conditions reduce to p > 0, tested
    as p > 0.05 to absorb fitting noise.
    """
    r = envelope.radii
    if r.size < 8 or r.max() / r.min() < 100 * (1 - 1e-9):
        raise InvalidArgumentError("need at least 8 radii over two decades")
    v0 = _verdict(r, envelope.eta0, True)
    v1 = _verdict(r, envelope.eta1, False)
    return {"eta0": v0, "eta1": v1, "all_hold": bool(v0["holds"] and v1["holds"])}


# ---------------------------------------------------------------------------
# Pohozaev balance


def pohozaev_terms(fld, pot, h, g, r):
    """All terms of the Pohozaev identity at radius r (left side, then right side)."""
    calc = FrequencyCalculator(fld, pot, h, g)
    N = fld.N
    r = float(r)
    area = r ** (N - 1)
    ra = np.array([r])
    U = fld.surface_values(ra)[0]
    Ur = fld.surface_radial_derivative(ra)[0]
    w = fld.quad.weights
    terms = {
        "energy_volume": -0.5 * (N - 2) * calc.ball_integral("energy", ra)[0],
        "energy_surface": 0.5 * r * area * calc.surface_energy(ra)[0],
        "normal_flux": r * area * float(np.sum(w * np.abs(Ur) ** 2)),
        "h_gradient_volume": 0.0,
        "h_volume": 0.0,
        "h_surface": 0.0,
        "G_surface": 0.0,
        "G_volume": 0.0,
    }
    if h is not None and not h.is_zero:
        hs = np.real(h.rho(ra))[0] * h.chi_values(fld.quad.nodes)
        terms["h_gradient_volume"] = -0.5 * calc.ball_integral("xh", ra)[0]
        terms["h_volume"] = -0.5 * N * calc.ball_integral("h", ra)[0]
        terms["h_surface"] = 0.5 * r * area * float(np.sum(w * hs * np.abs(U) ** 2))
    if g is not None and not g.is_zero:
        x = r * fld.quad.nodes
        terms["G_surface"] = r * area * float(np.sum(w * g.G(x, np.abs(U) ** 2)))
        terms["G_volume"] = -calc.ball_integral("G", ra)[0]
    return terms


LEFT_TERMS = ("energy_volume", "energy_surface")


def pohozaev_residual(fld, pot, h, g, r):
    """|LHS - RHS| relative to the largest term, and the labelled term breakdown."""
    terms = pohozaev_terms(fld, pot, h, g, r)
    lhs = sum(terms[k] for k in LEFT_TERMS)
    rhs = sum(v for k, v in terms.items() if k not in LEFT_TERMS)
    if not all(np.isfinite(v) for v in terms.values()):
        return float("inf"), terms
    # terms carry the dimension of r^{N-2} |u|^2; that bound keeps the ratio
    # meaningful when every term vanishes (a constant solution)
    U = fld.surface_values(np.array([float(r)]))[0]
    floor = float(r) ** (fld.N - 2) * float(np.sum(fld.quad.weights * np.abs(U) ** 2))
    scale = max(max(abs(v) for v in terms.values()), floor)
    res = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return float(res), terms


def pohozaev_json(residual, terms, r):
    clean = {k: float(v) for k, v in terms.items()}
    return json.dumps({"r": float(r), "residual": residual, "terms": clean}, indent=2, sort_keys=True)


def corrupted_copy(fld, amplitude=1.0, power=1.0):
    """The field with every reduced mode multiplied by 1 + amplitude (r/R)^power.

    A smooth non-solution with a regular power-law structure at the origin,
    used as a negative control for residual checks.
    """
    from .field import FourierRadialField

    mod = 1 + amplitude * (fld.grid.nodes / fld.grid.R) ** power
    return FourierRadialField(fld.spectrum, fld.quad, fld.grid, fld.exponents, fld.W * mod[:, None], {"kind": "corrupted"})
