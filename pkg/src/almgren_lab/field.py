"""Fourier-radial representation of solutions and the radial solvers.

A field is ``u(r theta) = sum_k phi_k(r) psi_k(theta)`` over the computed
angular eigenbasis.  Each mode is stored in reduced form
``phi_k(r) = r**p_k * w_k(log r)`` with ``p_k = sigma_k^+``, so a regular
mode keeps full relative accuracy down to the inner radius.

Mode equations are solved through the variation-of-parameters formula

    phi(l) = l^{s+} (c1 + int_l^R s^{1-s+} zeta / (s+ - s-) ds)
           + l^{s-} (c2 + int_l^R s^{1-s-} zeta / (s- - s+) ds)

with the finite-energy choice of ``c2`` that removes the ``l^{s-}`` branch.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import radial
from .errors import (
    InvalidArgumentError,
    InvalidNonlinearity,
    NonintegrableForcing,
    Nonconvergence,
    UnsupportedResonance,
)
from .radial import RadialGrid


# ---------------------------------------------------------------------------
# perturbation h(x) = rho(|x|) chi(x/|x|)


@dataclass(frozen=True)
class PerturbationSpec:
    rho: Callable
    drho: Callable
    chi: Callable = None
    epsilon: float = None
    label: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def is_radial(self):
        return self.chi is None

    @property
    def is_zero(self):
        return self.label == "zero"

    def chi_values(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.chi is None:
            return np.ones(theta.shape[:-1])
        return np.asarray(self.chi(theta), dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return self.rho(r) * self.chi_values(x / r[..., None])

    def x_dot_grad(self, x):
        """x . grad h = r rho'(r) chi(theta), exact for separable h."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return r * self.drho(r) * self.chi_values(x / r[..., None])

    def scaled(self, t):
        return PerturbationSpec(
            lambda r: t * self.rho(r), lambda r: t * self.drho(r), self.chi, self.epsilon,
            self.label if t != 0 else "zero", dict(self.params, scale=t),
        )


def zero_perturbation():
    z = lambda r: np.zeros_like(np.asarray(r, dtype=float))
    return PerturbationSpec(z, z, None, None, "zero", {})


def _chi_tilt(amplitude):
    if amplitude == 0:
        return None
    return lambda theta: 1.0 + amplitude * np.asarray(theta)[..., 2]


def inverse_square_eps(c, eps, chi_amplitude=0.0):
    """h(x) = c |x|^(-2+eps) (1 + chi_amplitude * x_3/|x|)."""
    c, eps = float(c), float(eps)
    return PerturbationSpec(
        lambda r: c * np.asarray(r, dtype=float) ** (-2.0 + eps),
        lambda r: c * (-2.0 + eps) * np.asarray(r, dtype=float) ** (-3.0 + eps),
        _chi_tilt(chi_amplitude), eps, "inverse_square_eps",
        {"c": c, "eps": eps, "chi_amplitude": chi_amplitude},
    )


def constant_h(c):
    c = float(c)
    return PerturbationSpec(
        lambda r: np.full_like(np.asarray(r, dtype=float), c),
        lambda r: np.zeros_like(np.asarray(r, dtype=float)), None, 2.0, "constant", {"c": c},
    )


def radial_table(path):
    """h from a table with columns ``r  Re(rho)  [Im(rho)]``, spline in log r."""
    from scipy.interpolate import CubicSpline

    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] not in (2, 3) or np.any(data[:, 0] <= 0) or np.any(np.diff(data[:, 0]) <= 0):
        raise InvalidArgumentError(f"{path}: need increasing positive radii and 2 or 3 columns")
    vals = data[:, 1] + (1j * data[:, 2] if data.shape[1] == 3 else 0)
    t = np.log(data[:, 0])
    sp = CubicSpline(t, vals)
    dsp = sp.derivative()
    lo, hi = data[0, 0], data[-1, 0]

    def check(r):
        r = np.asarray(r, dtype=float)
        if np.any(r < lo * (1 - 1e-12)) or np.any(r > hi * (1 + 1e-12)):
            raise InvalidArgumentError(f"radius outside tabulated range [{lo:g}, {hi:g}]")
        return r

    return PerturbationSpec(
        lambda r: sp(np.log(check(r))), lambda r: dsp(np.log(check(r))) / np.asarray(r),
        None, None, "radial_table", {"table": str(path)},
    )


# ---------------------------------------------------------------------------
# nonlinearity f(x, z) = g(x, |z|^2) z


@dataclass(frozen=True)
class NonlinearitySpec:
    g: Callable
    G: Callable
    x_gradient_G_dot_x: Callable
    growth_constant: float
    label: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def is_zero(self):
        return self.label == "zero"

    def check_growth(self, N=3, radii=(1e-3, 0.1, 1.0), s_values=None):
        """Sample |g s| + |grad_x G . x| <= C_g (s + s^(2*/2)) on a lattice."""
        crit_half = N / (N - 2.0)
        s = np.asarray(s_values if s_values is not None else np.logspace(-8, 4, 61))
        worst = 0.0
        for r in radii:
            x = np.tile([0.0, 0.0, r], (s.size, 1))
            lhs = np.abs(self.g(x, s) * s) + np.abs(self.x_gradient_G_dot_x(x, s))
            rhs = self.growth_constant * (s + s**crit_half)
            worst = max(worst, float(np.max(lhs / rhs)))
        if worst > 1.0 + 1e-12:
            raise InvalidNonlinearity(f"growth condition violated by factor {worst:.3g}")
        return worst

    def check_primitive(self, s_values=(0.1, 0.5, 1.0, 2.0), x=(0.0, 0.0, 0.5), step=1e-6):
        """Max relative error of 2 dG/ds = g by central differences."""
        xx = np.asarray([x], dtype=float)
        worst = 0.0
        for s in s_values:
            d = (self.G(xx, np.array([s + step])) - self.G(xx, np.array([s - step])))[0] / (2 * step)
            gv = self.g(xx, np.array([s]))[0]
            worst = max(worst, abs(2 * d - gv) / max(abs(gv), 1e-300))
        return worst


def zero_nonlinearity():
    z = lambda x, s: np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(s)))
    return NonlinearitySpec(z, z, z, 1.0, "zero", {})


def power_nonlinearity(p, coupling, weight=0.0):
    """g(x, s) = coupling |x|^weight s^p, so G = coupling |x|^weight s^(p+1) / (2(p+1))."""
    p, coupling, weight = float(p), float(coupling), float(weight)
    if p < 0:
        raise InvalidNonlinearity("power nonlinearity needs p >= 0")

    def rw(x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1) ** weight if weight else 1.0

    def g(x, s):
        return coupling * rw(x) * np.asarray(s, dtype=float) ** p

    def G(x, s):
        return coupling * rw(x) * np.asarray(s, dtype=float) ** (p + 1) / (2 * (p + 1))

    def xgG(x, s):
        return weight * G(x, s)

    return NonlinearitySpec(
        g, G, xgG, abs(coupling) * (1 + abs(weight) / (2 * (p + 1))),
        "power", {"p": p, "coupling": coupling, "weight": weight},
    )


# ---------------------------------------------------------------------------
# the field


@dataclass
class FourierRadialField:
    """Solution tabulated as reduced modes ``w_k`` on a log grid.

    ``exponents[k]`` is the power ``p_k`` with ``phi_k = r**p_k w_k``.
    """

    spectrum: object
    quad: object
    grid: RadialGrid
    exponents: np.ndarray
    W: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=complex)
        self.exponents = np.asarray(self.exponents, dtype=float)
        if self.W.shape != (self.grid.count, self.exponents.size):
            raise InvalidArgumentError("mode table shape does not match grid and exponents")
        if self.K > self.spectrum.count:
            raise InvalidArgumentError("more modes than retained eigenpairs")

    @property
    def K(self):
        return self.exponents.size

    @property
    def N(self):
        return self.spectrum.dimension

    @cached_property
    def _wspline(self):
        return radial.spline(self.grid, self.W)

    @cached_property
    def _wdspline(self):
        return self._wspline.derivative()

    @cached_property
    def psi_nodes(self):
        """psi_k on the quadrature nodes, ``(n_ang, K)``."""
        return self.spectrum.psi_values(self.quad.nodes, self.K)

    @cached_property
    def psi_grad_nodes(self):
        return self.spectrum.psi_gradients(self.quad.nodes, self.K)

    @cached_property
    def mu(self):
        return self.spectrum.eigenvalues[: self.K]

    @property
    def phi_nodes(self):
        return self.grid.nodes[:, None] ** self.exponents * self.W

    def modes(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        self.grid.require(r)
        return r[:, None] ** self.exponents * self._wspline(np.log(r))

    def mode_derivatives(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        self.grid.require(r)
        t = np.log(r)
        w, wt = self._wspline(t), self._wdspline(t)
        return r[:, None] ** (self.exponents - 1) * (self.exponents * w + wt)

    def reduced(self, r):
        """r^{-p_k} phi_k(r)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        self.grid.require(r)
        return self._wspline(np.log(r))

    def values(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        psi = self.spectrum.psi_values(x / r[:, None], self.K)
        return np.einsum("nk,nk->n", self.modes(r), psi)

    def gradient(self, x):
        """grad u = (d_r u) theta + r^{-1} grad_S u, Cartesian ``(n, 3)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        theta = x / r[:, None]
        psi = self.spectrum.psi_values(theta, self.K)
        dpsi = self.spectrum.psi_gradients(theta, self.K)
        ur = np.einsum("nk,nk->n", self.mode_derivatives(r), psi)
        us = np.einsum("nk,nkc->nc", self.modes(r), dpsi)
        return ur[:, None] * theta + us / r[:, None]

    def surface_values(self, r):
        """u(r_i theta_j) on the quadrature nodes, ``(len(r), n_ang)``."""
        return self.modes(r) @ self.psi_nodes.T

    def surface_radial_derivative(self, r):
        return self.mode_derivatives(r) @ self.psi_nodes.T

    def scaled(self, c):
        return FourierRadialField(self.spectrum, self.quad, self.grid, self.exponents, c * self.W, dict(self.info))

    # -- serialization ----------------------------------------------------

    def header(self, gamma=None):
        return {
            "K": int(self.K),
            "grid": self.grid.describe(),
            "basis": self.spectrum.basis.fingerprint(),
            "quadrature_resolution": int(self.quad.resolution),
            "exponents": [float(p) for p in self.exponents],
            "gamma": None if gamma is None else float(gamma),
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["r"]
        for k in range(1, self.K + 1):
            cols += [f"re_phi_{k}", f"im_phi_{k}"]
        w.writerow(cols)
        phi = self.phi_nodes
        for i, r in enumerate(self.grid.nodes):
            row = [f"{r:.15e}"]
            for k in range(self.K):
                row += [f"{phi[i, k].real:.15e}", f"{phi[i, k].imag:.15e}"]
            w.writerow(row)
        return buf.getvalue()

    def to_json_header(self, gamma=None):
        return json.dumps(self.header(gamma), indent=2, sort_keys=True)


def synthesize_model_solution(spectrum, k, amplitude, grid, quad, K=None):
    """Exact solution ``amplitude * r^{sigma_k^+} psi_k`` of L u = 0 (k is 1-based)."""
    K = K or spectrum.count
    if not 1 <= k <= K:
        raise InvalidArgumentError(f"mode index {k} outside 1..{K}")
    sp = spectrum.indicial_roots[:K, 0]
    W = np.zeros((grid.count, K), dtype=complex)
    W[:, k - 1] = amplitude
    return FourierRadialField(spectrum, quad, grid, sp, W, {"kind": "model", "k": k})


# ---------------------------------------------------------------------------
# projections


def project_modes(u_sampler, h, g, spectrum, quad, lam, K=None, grid=None):
    """Surface projections phi_k(lam) and zeta_k(lam) onto psi_k.

    ``u_sampler`` is a field or a callable on points ``(n, 3)``.
    """
    if isinstance(u_sampler, FourierRadialField):
        grid = grid or u_sampler.grid
        K = K or u_sampler.K
        sampler = u_sampler.values
    else:
        sampler = u_sampler
    K = K or spectrum.count
    if grid is not None and not grid.contains(lam):
        raise InvalidArgumentError(f"lambda={lam} outside the radial grid")
    if lam <= 0:
        raise InvalidArgumentError("lambda must be positive")
    x = lam * quad.nodes
    u = sampler(x)
    psi_w = spectrum.psi_values(quad.nodes, K).conj() * quad.weights[:, None]
    phi = u @ psi_w
    coeff = np.zeros(quad.size)
    if h is not None:
        coeff = coeff + h(x)
    if g is not None:
        coeff = coeff + g.g(x, np.abs(u) ** 2)
    zeta = (coeff * u) @ psi_w
    return phi, zeta


def forcing_on_grid(fld, h, g, U=None):
    """zeta_k at every grid node from the field's own values."""
    nodes = fld.quad.nodes
    r = fld.grid.nodes
    if U is None:
        U = fld.surface_values(r)
    coeff = np.zeros(U.shape)
    x = r[:, None, None] * nodes[None, :, :]
    if h is not None and not h.is_zero:
        coeff = coeff + h.rho(r)[:, None] * h.chi_values(nodes)[None, :]
    if g is not None and not g.is_zero:
        coeff = coeff + g.g(x, np.abs(U) ** 2)
    psi_w = fld.psi_nodes.conj() * fld.quad.weights[:, None]
    return (coeff * U) @ psi_w


# ---------------------------------------------------------------------------
# variation of parameters


def _check_sigma(sigma):
    sp, sm = np.asarray(sigma[0], float), np.asarray(sigma[1], float)
    if np.any(sp <= sm):
        raise UnsupportedResonance("sigma^+ must exceed sigma^- (double indicial root)")
    return sp, sm


def _tabulate(zeta, grid):
    z = zeta(grid.nodes) if callable(zeta) else zeta
    z = np.asarray(z, dtype=complex)
    if z.shape[0] != grid.count:
        raise InvalidArgumentError("zeta must be tabulated on the grid nodes")
    return z


def radial_closed_form(zeta, sigma, R, c1, c2, grid):
    """phi on the grid from the variation-of-parameters formula with given c1, c2."""
    sp, sm = _check_sigma(sigma)
    z = _tabulate(zeta, grid)
    lam = grid.nodes
    delta = sp - sm
    tR = np.log(R)
    Fp = radial.spline(grid, lam**(2 - sp) * z).antiderivative()
    gm = lam**(2 - sm) * z
    Fm = radial.spline(grid, gm).antiderivative()
    Ip = (Fp(tR) - Fp(grid.t)) / delta
    tail, _ = radial.power_tail(grid, gm, warn=False)
    if np.isfinite(tail).all():
        # split c2 + int_lam^R as (c2 + int_0^R) - int_0^lam: the first part is an
        # exact homogeneous solution, the second has no cancellation near 0
        J = Fm(grid.t) - Fm(grid.t[0]) + tail
        JR = Fm(tR) - Fm(grid.t[0]) + tail
        return lam**sp * (c1 + Ip) + lam**sm * (c2 - JR / delta) + lam**sm * J / delta
    Im = (Fm(tR) - Fm(grid.t)) / (-delta)
    return lam**sp * (c1 + Ip) + lam**sm * (c2 + Im)


def _left_integral(grid, g):
    """int_0^lambda (in t) with power tail; divergent tails raise."""
    tail, _ = radial.power_tail(grid, g, warn=False)
    if np.any(~np.isfinite(tail)):
        raise NonintegrableForcing("forcing integral diverges at the origin")
    anti = radial.spline(grid, g).antiderivative()
    return anti(grid.t) - anti(grid.t[0]) + tail


def regular_constant_c2(zeta, sigma, R, grid):
    """c2 = -int_0^R s^{1-s-} zeta / (s- - s+) ds, the finite-energy choice."""
    sp, sm = _check_sigma(sigma)
    z = _tabulate(zeta, grid)
    lam = grid.nodes
    g = lam ** (2 - sm) * z
    J = _left_integral(grid, g)
    JR = radial.spline(grid, J)(np.log(R)) if R != grid.R else J[-1]
    return -JR / (sm - sp)


def regular_modes(zeta, sig_p, sig_m, boundary, grid):
    """Reduced modes w (phi = l^{s+} w) of the regular solution with phi(R) given.

    Vectorized over columns of ``zeta``.
    """
    sp, sm = _check_sigma((sig_p, sig_m))
    z = np.asarray(zeta, dtype=complex).reshape(grid.count, -1)
    lam = grid.nodes[:, None]
    delta = sp - sm
    R = grid.R
    gp = lam ** (2 - sp) * z
    gm = lam ** (2 - sm) * z
    anti_p = radial.spline(grid, gp).antiderivative()
    P = anti_p(grid.t[-1]) - anti_p(grid.t)
    J = _left_integral(grid, gm)
    c1 = R**-sp * (np.asarray(boundary) - R**sm * J[-1] / delta)
    return c1 + P / delta + lam ** (-delta) * J / delta


# ---------------------------------------------------------------------------
# solvers


def boundary_vector(boundary_modes, K):
    """Normalize {k: value} (1-based) or a sequence into a length-K array."""
    b = np.zeros(K, dtype=complex)
    if isinstance(boundary_modes, dict):
        for k, v in boundary_modes.items():
            if not 1 <= int(k) <= K:
                raise InvalidArgumentError(f"boundary mode {k} outside 1..{K}")
            b[int(k) - 1] = v
    else:
        arr = np.asarray(boundary_modes, dtype=complex)
        if arr.size > K:
            raise InvalidArgumentError("more boundary values than modes")
        b[: arr.size] = arr
    return b


def boundary_modes_from_function(spectrum, quad, f, K=None):
    """phi_k(R) = int f conj(psi_k) for boundary data f on the unit sphere."""
    K = K or spectrum.count
    vals = np.asarray(f(quad.nodes), dtype=complex)
    return (vals * quad.weights) @ spectrum.psi_values(quad.nodes, K).conj()


def _solve_modes(spectrum, rho, boundary, grid, forcing=None, tol=1e-13, max_iter=200):
    """Fixed-point solve of the decoupled mode equations with zeta = rho phi + forcing."""
    K = boundary.size
    roots = spectrum.indicial_roots[:K]
    sp, sm = roots[:, 0], roots[:, 1]
    lam = grid.nodes
    W = np.zeros((grid.count, K), dtype=complex)
    active = np.abs(boundary) > 0
    if forcing is not None:
        active |= np.any(np.abs(forcing) > 0, axis=0)
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return W, 0
    f_act = forcing[:, idx] if forcing is not None else 0.0
    rho_v = rho(lam)[:, None] if rho is not None else None
    scale = lam[:, None] ** sp[idx]
    w = regular_modes(np.zeros((grid.count, idx.size)) + f_act, sp[idx], sm[idx], boundary[idx], grid)
    it = 0
    if rho_v is not None and np.any(rho_v != 0):
        for it in range(1, max_iter + 1):
            zeta = rho_v * scale * w + f_act
            w_new = regular_modes(zeta, sp[idx], sm[idx], boundary[idx], grid)
            change = np.abs(w_new - w).max() / max(np.abs(w_new).max(), 1e-300)
            w = w_new
            if change <= tol:
                break
        else:
            raise Nonconvergence(f"mode fixed point did not converge in {max_iter} sweeps", change)
    W[:, idx] = w
    return W, it


def solve_perturbed(spectrum, h, boundary_modes, grid, quad, K=None, forcing=None, tol=1e-13, max_iter=200):
    """Solve L u = h u in the punctured ball for radial h, mode by mode.

    Each mode takes its prescribed value at R and the regular (finite
    energy) branch at the origin.
    """
    K = K or spectrum.count
    if h is not None and not h.is_radial:
        raise InvalidArgumentError("non-radial perturbation: use solve_picard")
    b = boundary_vector(boundary_modes, K)
    spectrum.indicial_roots  # positivity check
    rho = None if h is None or h.is_zero else h.rho
    W, sweeps = _solve_modes(spectrum, rho, b, grid, forcing, tol, max_iter)
    sp = spectrum.indicial_roots[:K, 0]
    return FourierRadialField(spectrum, quad, grid, sp, W, {"kind": "perturbed", "sweeps": sweeps})


def solve_picard(spectrum, h, g, boundary_modes, grid, quad, damping=1.0, max_iter=30, K=None, tol=1e-8):
    """Picard iteration for L u = h u + g(x, |u|^2) u.

    The angular mean of h is treated implicitly inside each mode solve; the
    remainder of h and the nonlinearity are re-projected from the previous
    iterate at every sweep.
    """
    if not 0 < damping <= 1:
        raise InvalidArgumentError("damping must lie in (0, 1]")
    K = K or spectrum.count
    h = h or zero_perturbation()
    g = g or zero_nonlinearity()
    if not g.is_zero:
        g.check_growth(spectrum.dimension)
    b = boundary_vector(boundary_modes, K)
    chi = h.chi_values(quad.nodes)
    chi_mean = float(quad.integrate(chi) / quad.weights.sum())
    rho_impl = None if h.is_zero else (lambda r: chi_mean * h.rho(r))
    sp = spectrum.indicial_roots[:K, 0]

    W, _ = _solve_modes(spectrum, rho_impl, b, grid)
    fld = FourierRadialField(spectrum, quad, grid, sp, W)
    psi_w = fld.psi_nodes.conj() * quad.weights[:, None]
    r = grid.nodes
    x = r[:, None, None] * quad.nodes[None, :, :]
    explicit_h = None if h.is_zero or h.is_radial else h.rho(r)[:, None] * (chi - chi_mean)[None, :]
    log = []
    for it in range(1, max_iter + 1):
        U = fld.surface_values(r)
        coeff = np.zeros(U.shape)
        if explicit_h is not None:
            coeff = coeff + explicit_h
        if not g.is_zero:
            coeff = coeff + g.g(x, np.abs(U) ** 2)
        forcing = (coeff * U) @ psi_w
        W_new, _ = _solve_modes(spectrum, rho_impl, b, grid, forcing)
        W_next = damping * W_new + (1 - damping) * fld.W
        change = np.abs(W_next - fld.W).max() / max(np.abs(W_next).max(), 1e-300)
        log.append(float(change))
        fld = FourierRadialField(spectrum, quad, grid, sp, W_next)
        if change <= tol:
            break
    else:
        raise Nonconvergence(f"Picard iteration did not converge in {max_iter} iterations", log[-1])
    fld.info.update({"kind": "picard", "iterations": len(log), "iteration_log": log})
    fld.info["equation_residual"] = equation_residual(fld, h, g)
    return fld


# ---------------------------------------------------------------------------
# residuals


def ode_residual(phi, zeta, mu, grid, N=3):
    """Mode ODE residual in log-radial form at interior nodes.

    With t = log r the equation ``-phi'' - (N-1) phi'/r + mu phi / r^2 = zeta``
    reads ``-phi_tt - (N-2) phi_t + mu phi = r^2 zeta``; derivatives come
    from fourth-order finite differences.  Returns ``(residual, terms)`` where
    ``terms`` stacks the magnitudes of the four contributions.
    """
    phi = np.asarray(phi)
    zeta = np.asarray(zeta)
    lam = grid.nodes[2:-2]
    if phi.ndim == 2:
        lam = lam[:, None]
    d1, d2 = radial.fd_log_derivatives(phi, grid.h)
    mid = phi[2:-2]
    forcing = lam**2 * zeta[2:-2]
    res = -d2 - (N - 2) * d1 + mu * mid - forcing
    terms = np.stack([np.abs(d2), np.abs((N - 2) * d1), np.abs(mu * mid), np.abs(forcing)])
    return res, terms


def equation_residual(fld, h, g):
    """Max over interior nodes of the strong-form residual relative to the local data scale."""
    zeta = forcing_on_grid(fld, h, g)
    res, terms = ode_residual(fld.phi_nodes, zeta, fld.mu, fld.grid, fld.N)
    num = np.sqrt(np.sum(np.abs(res) ** 2, axis=1))
    # |phi| joins the scale so modes with mu = 0 and tiny forcing are not
    # judged on roundoff alone
    mag = np.abs(fld.phi_nodes[2:-2])
    den = np.sqrt(np.sum(terms**2, axis=(0, 2)) + np.sum(mag**2, axis=1))
    return float(np.max(num / np.maximum(den, 1e-300)))
