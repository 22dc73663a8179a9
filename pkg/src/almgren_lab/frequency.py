"""Height, energy and frequency of a field, and the limit of the frequency.

All surface integrals are taken on the unit sphere after rescaling, so
``H(r) = int_S |u(r theta)|^2`` and the factors ``r^{N-1}`` of surface
measures cancel in every ratio below.  Volume integrals over ``B_r`` are
radial integrals (in ``t = log s``) of angular integrals tabulated on the
radial grid, closed at the origin by a power-law tail.
"""

import csv
import io
import json
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.optimize import minimize_scalar

from . import radial
from .errors import DegenerateHeight, InvalidArgumentError, NoLimitDetected, TailWarning

H_STEP = 2e-5
N_STEP = 1e-3


class FrequencyCalculator:
    """Caches the grid tabulations shared by H, D, N, nu1 and nu2 for one field."""

    def __init__(self, fld, pot=None, h=None, g=None, route="modal"):
        if route not in ("modal", "direct"):
            raise InvalidArgumentError(f"unknown energy route {route!r}")
        self.field = fld
        self.pot = pot
        self.h = None if h is None or h.is_zero else h
        self.g = None if g is None or g.is_zero else g
        self.route = route
        self.N = fld.N
        self.grid = fld.grid
        self.quad = fld.quad

    # -- tabulations on the radial grid ------------------------------------

    @cached_property
    def _U(self):
        return self.field.surface_values(self.grid.nodes)

    @cached_property
    def _x(self):
        return self.grid.nodes[:, None, None] * self.quad.nodes[None, :, :]

    def _sphere(self, values):
        return values @ self.quad.weights

    @cached_property
    def _s2(self):
        return np.abs(self._U) ** 2

    @cached_property
    def _chi_mean(self):
        chi = self.h.chi_values(self.quad.nodes)
        return float(self._sphere(chi) / self.quad.weights.sum())

    @cached_property
    def _mixing_coefficient(self):
        """Part of Re h + g(x, |u|^2) that couples modes, on the (radius, node) lattice."""
        c = np.zeros(self._U.shape)
        if self.h is not None and not self.h.is_radial:
            chi = self.h.chi_values(self.quad.nodes) - self._chi_mean
            c = c + np.real(self.h.rho(self.grid.nodes))[:, None] * chi[None, :]
        if self.g is not None:
            c = c + self.g.g(self._x, self._s2)
        return c

    def _radial_weight(self, values):
        """Mode-diagonal weight: angular mean of h applied to values(rho, rho', s)."""
        if self.h is None:
            return np.zeros(self.grid.count)
        lam = self.grid.nodes
        mean = 1.0 if self.h.is_radial else self._chi_mean
        return mean * np.real(values(self.h.rho(lam), self.h.drho(lam), lam))

    def _energy_density_direct(self):
        if self.pot is None:
            raise InvalidArgumentError("the direct energy route needs the angular potential")
        fld = self.field
        lam = self.grid.nodes
        nodes = self.quad.nodes
        A = np.asarray(self.pot.A_sampler(nodes), dtype=float)
        a = np.asarray(self.pot.a_sampler(nodes), dtype=float)
        Ur = fld.surface_radial_derivative(lam)
        B = -1j * fld.psi_grad_nodes + A[:, None, :] * fld.psi_nodes[:, :, None]
        V = np.einsum("rk,nkc->rnc", fld.phi_nodes, B)
        dens = np.abs(Ur) ** 2 + (np.sum(np.abs(V) ** 2, axis=2) - a[None, :] * self._s2) / lam[:, None] ** 2
        return self._sphere(dens)

    def _integral(self, columns):
        return _SummedIntegral(self.grid, columns, self._floor)

    @cached_property
    def _floor(self):
        """Roundoff level of t-integrands, from the energy scale s^{N-2} H(s)."""
        lam = self.grid.nodes
        return 1e-13 * float(np.max(lam ** (self.N - 2) * np.sum(np.abs(self.field.phi_nodes) ** 2, axis=1)))

    @cached_property
    def _D_integral(self):
        """Energy integral split into one column per mode plus a mode-mixing column.

        Each mode column is a clean power series near the origin, so the
        tail extrapolation is applied where it is most accurate.
        """
        fld = self.field
        lam = self.grid.nodes
        s2 = np.abs(fld.phi_nodes) ** 2
        mixing = self._sphere(self._mixing_coefficient * self._s2)
        rho = self._radial_weight(lambda rho, drho, s: rho)
        if self.route == "modal":
            dphi = fld.mode_derivatives(lam)
            per_mode = np.abs(dphi) ** 2 + (fld.mu / lam[:, None] ** 2 - rho[:, None]) * s2
            cols = np.column_stack([per_mode, -mixing])
        else:
            e = self._energy_density_direct() - rho * np.sum(s2, axis=1) - mixing
            cols = e[:, None]
        return self._integral(lam[:, None] ** self.N * cols)

    @cached_property
    def _nu2_volume(self):
        """Radial integrals for the volume terms of nu2."""
        lam = self.grid.nodes
        N = self.N
        fld = self.field
        w = self._radial_weight(lambda rho, drho, s: 2 * rho + s * drho)
        first = [w[:, None] * np.abs(fld.phi_nodes) ** 2]
        if self.h is not None and not self.h.is_radial:
            chi = self.h.chi_values(self.quad.nodes) - self._chi_mean
            lam_w = np.real(2 * self.h.rho(lam) + lam * self.h.drho(lam))
            first.append(self._sphere(lam_w[:, None] * chi[None, :] * self._s2)[:, None])
        third = np.zeros(lam.size)
        if self.g is not None:
            x, s2 = self._x, self._s2
            dens = (N - 2) * self.g.g(x, s2) * s2 - 2 * N * self.g.G(x, s2) - 2 * self.g.x_gradient_G_dot_x(x, s2)
            third = self._sphere(dens)
        return (
            self._integral(lam[:, None] ** N * np.column_stack(first)),
            self._integral(lam[:, None] ** N * third[:, None]),
        )

    @cached_property
    def _ball_integrals(self):
        """Volume integrals over B_r used by the Pohozaev balance (per-mode tails)."""
        fld = self.field
        lam = self.grid.nodes
        N = self.N
        s2 = np.abs(fld.phi_nodes) ** 2
        dphi = fld.mode_derivatives(lam)
        energy = np.abs(dphi) ** 2 + fld.mu / lam[:, None] ** 2 * s2
        cols = {"energy": energy}
        rho = self._radial_weight(lambda rho, drho, s: rho)
        xh = self._radial_weight(lambda rho, drho, s: s * drho)
        h_cols, xh_cols = [rho[:, None] * s2], [xh[:, None] * s2]
        if self.h is not None and not self.h.is_radial:
            chi = (self.h.chi_values(self.quad.nodes) - self._chi_mean)[None, :]
            h_cols.append(self._sphere(np.real(self.h.rho(lam))[:, None] * chi * self._s2)[:, None])
            xh_cols.append(self._sphere(np.real(lam * self.h.drho(lam))[:, None] * chi * self._s2)[:, None])
        cols["h"] = np.column_stack(h_cols)
        cols["xh"] = np.column_stack(xh_cols)
        G = np.zeros(lam.size)
        if self.g is not None:
            G = self._sphere(self.g.x_gradient_G_dot_x(self._x, self._s2) + N * self.g.G(self._x, self._s2))
        cols["G"] = G[:, None]
        return {k: self._integral(lam[:, None] ** N * v) for k, v in cols.items()}

    def ball_integral(self, kind, r):
        """int_{B_r} of the energy density, Re h |u|^2, Re(x.grad h)|u|^2 or x.grad_x G + N G."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return self._ball_integrals[kind](r)

    def surface_energy(self, r):
        """int_S of |(grad + iA/|x|) u|^2 - a |u|^2/|x|^2 at radius r, by surface quadrature."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.pot is None:
            mu = self.field.mu
            return np.sum(np.abs(self.field.mode_derivatives(r)) ** 2, axis=1) + np.sum(
                mu * np.abs(self.field.modes(r)) ** 2, axis=1
            ) / r**2
        fld = self.field
        nodes = self.quad.nodes
        A = np.asarray(self.pot.A_sampler(nodes), dtype=float)
        a = np.asarray(self.pot.a_sampler(nodes), dtype=float)
        B = -1j * fld.psi_grad_nodes + A[:, None, :] * fld.psi_nodes[:, :, None]
        V = np.einsum("rk,nkc->rnc", fld.modes(r), B)
        U = fld.surface_values(r)
        Ur = fld.surface_radial_derivative(r)
        dens = np.abs(Ur) ** 2 + (np.sum(np.abs(V) ** 2, axis=2) - a[None, :] * np.abs(U) ** 2) / r[:, None] ** 2
        return self._sphere(dens)

    # -- pointwise quantities ------------------------------------------------

    def H(self, r):
        """Surface quadrature of |u|^2 on the sphere of radius r."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        U = self.field.surface_values(r)
        return self._sphere(np.abs(U) ** 2)

    def H_parseval(self, r):
        return np.sum(np.abs(self.field.modes(r)) ** 2, axis=1)

    def H_prime(self, r, step=H_STEP):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return radial.central_log_derivative(self.H_parseval, r, step) / r

    def D(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return r ** (2 - self.N) * self._D_integral(r)

    @property
    def D_tail(self):
        return self._D_integral.tail

    def frequency(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        H = self.H(r)
        if np.any(H <= 0):
            raise DegenerateHeight(f"H(r) <= 0 at r = {r[np.argmax(H <= 0)]:g}")
        return self.D(r) / H

    def N_prime(self, r, step=N_STEP):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        f = lambda rr: self.D(rr) / self.H_parseval(rr)
        return radial.central_log_derivative(f, r, step) / r

    def nu1(self, r):
        """Cauchy-Schwarz deficit of u and d_r u on the sphere of radius r.

        With b = sum|phi|^2, a = sum|phi'|^2 and c = Re sum phi conj(phi'),
        the deficit ``a b - c^2`` equals ``(Im sum phi conj(phi'))^2`` plus
        half the sum of ``|phi_j phi'_k - phi_k phi'_j|^2``.  In reduced
        variables each pair term has no cancellation, which keeps nu1
        nonnegative to roundoff even when it is tiny.
        """
        r = np.atleast_1d(np.asarray(r, dtype=float))
        fld = self.field
        w = fld.reduced(r)
        wt = fld._wdspline(np.log(r))
        p = fld.exponents
        scale = r[:, None] ** p
        # r phi'_k = r^{p_k} (p_k w_k + w_t)
        phi, rdphi = scale * w, scale * (p * w + wt)
        b = np.sum(np.abs(phi) ** 2, axis=1)
        im = np.imag(np.sum(phi * rdphi.conj(), axis=1))
        # pair term: r^{p_j + p_k} [(p_k - p_j) w_j w_k + w_j w'_k - w_k w'_j]
        pair = (p[None, :] - p[:, None])[None] * w[:, :, None] * w[:, None, :]
        pair = pair + w[:, :, None] * wt[:, None, :] - w[:, None, :] * wt[:, :, None]
        pair = pair * scale[:, :, None] * scale[:, None, :]
        deficit = im**2 + 0.5 * np.sum(np.abs(pair) ** 2, axis=(1, 2))
        return 2 * deficit / (r * b**2)

    def nu1_quadrature(self, r):
        """nu1 from surface quadrature of u and d_r u (cross-check)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        U = self.field.surface_values(r)
        Ur = self.field.surface_radial_derivative(r)
        a = self._sphere(np.abs(Ur) ** 2)
        b = self._sphere(np.abs(U) ** 2)
        c = self._sphere(np.real(U * Ur.conj()))
        return 2 * r * (a * b - c**2) / b**2

    def nu2_terms(self, r):
        """The three contributions to nu2 (volume h, surface G, volume G)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        N = self.N
        b = self.H(r)
        vol_h, vol_g = self._nu2_volume
        t1 = -vol_h(r) / (r ** (N - 1) * b)
        t2 = np.zeros(r.size)
        if self.g is not None:
            U = self.field.surface_values(r)
            s2 = np.abs(U) ** 2
            x = r[:, None, None] * self.quad.nodes[None, :, :]
            t2 = r * self._sphere(2 * self.g.G(x, s2) - self.g.g(x, s2) * s2) / b
        t3 = vol_g(r) / (r ** (N - 1) * b)
        return t1, t2, t3

    def nu2(self, r):
        t1, t2, t3 = self.nu2_terms(r)
        return t1 + t2 + t3


class _SummedIntegral:
    """Column-wise cumulative integrals from the origin, summed over columns."""

    def __init__(self, grid, columns, floor):
        self._inner = radial.RadialIntegral(grid, columns, warn=True, floor=floor)
        self.tail = float(np.sum(self._inner.tail))

    def __call__(self, r):
        return np.sum(np.atleast_2d(self._inner(r)), axis=-1)


# ---------------------------------------------------------------------------
# thin functional API


def height_H(fld, r):
    return FrequencyCalculator(fld).H(r)


def energy_D(fld, pot, h, g, r, route="modal"):
    return FrequencyCalculator(fld, pot, h, g, route).D(r)


def nu1(fld, r):
    return FrequencyCalculator(fld).nu1(r)


def nu2_direct(fld, h, g, r):
    return FrequencyCalculator(fld, None, h, g).nu2(r)


def default_radii(grid, count=49, margin=1.02):
    """Log-spaced radii kept clear of the grid ends so central differences fit."""
    return np.geomspace(grid.r_min * margin, grid.R / margin, count)


# ---------------------------------------------------------------------------
# profile


@dataclass(frozen=True)
class FrequencyProfile:
    radii: np.ndarray
    H: np.ndarray
    D: np.ndarray
    N: np.ndarray
    nu1: np.ndarray
    nu2_direct: np.ndarray
    nu2_residual: np.ndarray
    H_prime: np.ndarray
    N_prime: np.ndarray
    dimension: int = 3
    epsilon: float = None
    gamma_estimate: float = float("nan")
    gamma_fit_error: float = float("nan")
    fit_exponent: float = float("nan")
    tail_warning: bool = False

    @property
    def identity_residual(self):
        """|D - (r/2) H'| / (|D| + |H|) per radius."""
        return np.abs(self.D - 0.5 * self.radii * self.H_prime) / (np.abs(self.D) + np.abs(self.H))

    @property
    def decomposition_residual(self):
        """|N' - nu1 - nu2| / (1 + |N|) per radius."""
        return np.abs(self.nu2_residual) / (1 + np.abs(self.N))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "H", "D", "N", "nu1", "nu2_direct", "nu2_residual"])
        for row in zip(self.radii, self.H, self.D, self.N, self.nu1, self.nu2_direct, self.nu2_residual):
            w.writerow([f"{v:.15e}" for v in row])
        return buf.getvalue()

    def summary(self, spectrum=None, K1=None):
        out = {
            "gamma": _num(self.gamma_estimate),
            "fit_error": _num(self.gamma_fit_error),
            "fit_exponent": _num(self.fit_exponent),
            "K1": _num(K1),
            "max_identity_residual": float(np.max(self.identity_residual)),
            "max_decomposition_residual": float(np.max(self.decomposition_residual)),
            "min_nu1": float(np.min(self.nu1)),
            "tail_warning": bool(self.tail_warning),
        }
        if spectrum is not None and np.isfinite(self.gamma_estimate):
            k0, margin = match_indicial_root(spectrum, self.gamma_estimate)
            out["matched_k"] = k0 + 1
            out["margin_to_next_sigma"] = _num(margin)
        return out

    def to_json(self, spectrum=None, K1=None):
        return json.dumps(self.summary(spectrum, K1), indent=2, sort_keys=True)


def _num(v):
    return None if v is None or not np.isfinite(v) else float(v)


def frequency_N(fld, pot, h, g, radii=None, fit=True, route="modal"):
    """Sample H, D, N, nu1, nu2 and the two differential identities at ``radii``."""
    calc = FrequencyCalculator(fld, pot, h, g, route)
    radii = default_radii(fld.grid) if radii is None else np.asarray(radii, dtype=float)
    lo = fld.grid.r_min * np.exp(max(H_STEP, N_STEP))
    hi = fld.grid.R * np.exp(-max(H_STEP, N_STEP))
    if np.any(radii < lo * (1 - 1e-12)) or np.any(radii > hi * (1 + 1e-12)):
        raise InvalidArgumentError("radii must stay inside the grid, clear of the end points")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TailWarning)
        H = calc.H(radii)
        if np.any(H <= 0):
            raise DegenerateHeight("H(r) <= 0 on the sampled range")
        D = calc.D(radii)
        N = D / H
        n1 = calc.nu1(radii)
        n2 = calc.nu2(radii)
        dN = calc.N_prime(radii)
        dH = calc.H_prime(radii)
    tail_warn = any(issubclass(w.category, TailWarning) for w in caught)
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    eps = h.epsilon if h is not None and not h.is_zero else None
    prof = FrequencyProfile(radii, H, D, N, n1, n2, dN - n1 - n2, dH, dN, fld.N, eps, tail_warning=tail_warn)
    if fit:
        try:
            gamma, err, delta = _fit_limit(prof)
            prof = replace(prof, gamma_estimate=gamma, gamma_fit_error=err, fit_exponent=delta)
        except (NoLimitDetected, InvalidArgumentError):
            pass
    return prof


# ---------------------------------------------------------------------------
# limit extraction


def smallest_decade(radii):
    radii = np.asarray(radii)
    sel = radii <= radii.min() * 10 * (1 + 1e-9)
    return sel


def _varpro(r, y, delta):
    """Least squares of y ~ a + b r^delta; returns (coeffs, residual vector)."""
    X = np.stack([np.ones_like(r), r**delta], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef, y - X @ coef


def fit_power_correction(r, y, fallback=None, bounds=(0.05, 4.0)):
    """Fit y ~ a + b r^delta with delta by variable projection.

    Returns ``(a, b, delta, max_residual)``.
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = r.max()
    rs = r / scale
    obj = lambda d: float(np.sum(_varpro(rs, y, d)[1] ** 2))
    res = minimize_scalar(obj, bounds=bounds, method="bounded", options={"xatol": 1e-10})
    best = float(res.x)
    if fallback is not None and bounds[0] <= fallback <= bounds[1] and obj(fallback) <= obj(best):
        best = float(fallback)
    coef, resid = _varpro(rs, y, best)
    return float(coef[0]), float(coef[1] * scale**-best), best, float(np.max(np.abs(resid)))


def _fit_limit(profile):
    if profile.radii.size < 8 or profile.radii.max() / profile.radii.min() < 100 * (1 - 1e-9):
        raise InvalidArgumentError("need at least 8 radii spanning two decades")
    sel = smallest_decade(profile.radii)
    if sel.sum() < 3:
        raise InvalidArgumentError("need at least 3 radii in the smallest decade")
    gamma, _, delta, err = fit_power_correction(profile.radii[sel], profile.N[sel], profile.epsilon)
    if err > 0.05 * (1 + abs(gamma)):
        raise NoLimitDetected(f"frequency fit error {err:.3g} too large for gamma={gamma:.6g}")
    return gamma, err, delta


def estimate_gamma(profile):
    """(gamma, fit_error) from N(r) ~ gamma + b r^delta on the smallest decade."""
    gamma, err, _ = _fit_limit(profile)
    return gamma, err


def match_indicial_root(spectrum, gamma):
    """Nearest sigma^+_k to gamma (0-based k) and the gap to the next distinct root."""
    sp = spectrum.sigma_plus
    k0 = int(np.argmin(np.abs(sp - gamma)))
    others = np.abs(sp - sp[k0])
    others = others[others > 1e-8]
    margin = float(others.min()) if others.size else float("inf")
    return k0, margin


def check_H_scaling(profile, gamma):
    """(K1, positive_limit) for r^{-2 gamma} H(r).

    The limit at the origin is extrapolated from the smallest decade by
    ``a + b r^delta``.
    """
    q = profile.H / profile.radii ** (2 * gamma)
    K1 = float(q.max())
    return K1, scaled_height_limit(profile, gamma) >= 1e-8 * K1


def scaled_height_limit(profile, gamma):
    sel = smallest_decade(profile.radii)
    q = profile.H[sel] / profile.radii[sel] ** (2 * gamma)
    if np.ptp(q) <= 1e-14 * abs(q).max():
        return float(q.mean())
    a, _, _, _ = fit_power_correction(profile.radii[sel], q, profile.epsilon)
    return a


def scaled_height_cauchy(profile, gamma):
    """Relative spread of r^{-2 gamma} H over the smallest decade."""
    sel = smallest_decade(profile.radii)
    q = profile.H[sel] / profile.radii[sel] ** (2 * gamma)
    return float(np.ptp(q) / np.abs(q).max())


def log_term_amplitude(profile, gamma, delta=None):
    """Fit r^{-2 gamma} H ~ A + B log r + C r^delta on the smallest decade.

    Returns ``max |B log r| / |A|`` over the decade; a genuine logarithmic
    factor at leading order would make this of order one.
    """
    sel = smallest_decade(profile.radii)
    r = profile.radii[sel]
    q = profile.H[sel] / r ** (2 * gamma)
    if delta is None:
        delta = profile.fit_exponent if np.isfinite(profile.fit_exponent) else (profile.epsilon or 1.0)
    rs = r / r.max()
    X = np.stack([np.ones_like(rs), np.log(rs), rs**delta], axis=1)
    coef, *_ = np.linalg.lstsq(X, q, rcond=None)
    A, B = coef[0], coef[1]
    return float(np.max(np.abs(B * np.log(rs))) / abs(A))
