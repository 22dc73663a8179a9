"""Log-spaced radial grids, splines in log r and power-law tails at the origin.

All radial integrals are written in the variable ``t = log r`` (so
``ds = s dt``), interpolated by quintic splines and integrated exactly
through the spline antiderivative.  The missing piece ``(0, r_min)`` is
closed analytically by fitting ``f(t) ~ f0 * exp(q (t - t0))`` to the first
nodes.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import InvalidArgumentError, TailWarning

SPLINE_DEGREE = 5
TAIL_TOL = 1e-4
AITKEN_STRIDE = 16
NOISE_FLOOR = 1e-13


@dataclass(frozen=True)
class RadialGrid:
    r_min: float
    R: float
    count: int
    nodes: np.ndarray = field(init=False, repr=False)
    t: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.r_min < self.R:
            raise InvalidArgumentError(f"need 0 < r_min < R, got r_min={self.r_min}, R={self.R}")
        if self.count < 8:
            raise InvalidArgumentError("radial grid needs at least 8 nodes")
        t = np.linspace(np.log(self.r_min), np.log(self.R), int(self.count))
        nodes = np.exp(t)
        nodes[0], nodes[-1] = self.r_min, self.R
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def default(cls, R=1.0, r_min_factor=1e-4, count=801):
        return cls(r_min_factor * R, R, count)

    @property
    def h(self):
        return self.t[1] - self.t[0]

    def contains(self, r, slack=1e-12):
        r = np.asarray(r, dtype=float)
        return np.all((r >= self.r_min * (1 - slack)) & (r <= self.R * (1 + slack)))

    def require(self, r):
        if not self.contains(r):
            raise InvalidArgumentError(f"radius outside grid range [{self.r_min:g}, {self.R:g}]")

    def describe(self):
        return {"r_min": self.r_min, "R": self.R, "count": int(self.count), "spacing": "log"}


def spline(grid, values):
    """Quintic interpolating spline in ``t = log r`` (values along axis 0)."""
    return make_interp_spline(grid.t, values, k=SPLINE_DEGREE)


def _single_tail(g, j, h):
    """int_{-inf}^{t_j} of g ~ g_j exp(q (t - t_j)) with q from nodes j, j+1."""
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.log(np.abs(g[j + 1]) / np.abs(g[j])) / h
        tail = np.where(q > 0, g[j] / np.where(q > 0, q, 1.0), np.inf)
    return np.where(np.abs(g[j]) == 0, 0.0, tail)


def power_tail(grid, g, warn=True, reference=None, anti=None, stride=AITKEN_STRIDE, floor=0.0):
    """Integral of ``g(t) dt`` over ``(-inf, t0)`` from power-law fits.

    ``g`` holds integrand samples (in t) at the grid nodes, along axis 0.
    Single-exponent tails started at nodes ``0, m, 2m`` and carried back to
    ``t0`` differ by a geometric sequence when the integrand has a
    sub-leading power correction; Aitken's extrapolation removes it.
    Returns ``(tail, instability)``; ``tail`` is ``inf`` where the fitted
    exponent shows divergence.  Columns whose first sample lies below
    ``floor`` (or at roundoff level) are treated as vanishing there.
    """
    g = np.asarray(g)
    h = grid.h
    base = _single_tail(g, 0, h)
    # roundoff-level samples carry no meaningful exponent
    floor = max(floor, NOISE_FLOOR * float(np.max(np.abs(g), initial=0.0)))
    noise = np.abs(g[0]) <= np.maximum(NOISE_FLOOR * np.max(np.abs(g), axis=0), floor)
    base = np.where(noise & ~np.isfinite(base), 0.0, base)
    if g.shape[0] < 2 * stride + 2:
        return base, np.zeros(np.shape(base))
    if anti is None:
        anti = spline(grid, g).antiderivative()
    a0 = anti(grid.t[0])
    e1 = _single_tail(g, stride, h) - (anti(grid.t[stride]) - a0)
    e2 = _single_tail(g, 2 * stride, h) - (anti(grid.t[2 * stride]) - a0)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        d1, d2 = e1 - base, e2 - e1
        denom = d2 - d1
        ratio = d2 / np.where(d1 != 0, d1, 1.0)
        aitken = base - d1 * d1 / np.where(denom != 0, denom, 1.0)
        # accept only a clean geometric pattern with ratio away from 1
        ok = np.isfinite(aitken) & (d1 != 0) & (denom != 0) & (np.abs(ratio - 1) > 0.05) & (ratio > 0)
        tail = np.where(ok & np.isfinite(base), aitken, base)
        instability = np.where(np.isfinite(base), np.abs(tail - base), np.inf)
    if warn:
        scale = np.abs(reference) if reference is not None else np.abs(tail)
        bad = np.isfinite(instability) & (instability > TAIL_TOL * np.maximum(scale, 1e-300))
        if np.any(bad):
            warnings.warn("power-law tail extrapolation unstable", TailWarning, stacklevel=2)
    return tail, instability


def cumulative(grid, g, tail=True, warn=True, floor=0.0):
    """Left cumulative integral ``int_0^{r_i} ... = tail + int_{t0}^{t_i} g dt``.

    Returns ``(values_at_nodes, antiderivative_spline, tail)``; the spline
    gives the cumulative integral at any ``t`` inside the grid once the tail
    is added.
    """
    g = np.asarray(g)
    anti = spline(grid, g).antiderivative()
    base = anti(grid.t) - anti(grid.t[0])
    if tail:
        tl, _ = power_tail(grid, g, warn=warn, reference=base[-1], anti=anti, floor=floor)
    else:
        tl = np.zeros(g.shape[1:]) if g.ndim > 1 else 0.0
    return base + tl, anti, tl


class RadialIntegral:
    """``F(r) = int_0^r f`` for an integrand sampled on the grid (in t)."""

    def __init__(self, grid, g, tail=True, warn=True, floor=0.0):
        self.grid = grid
        self.values, self._anti, self.tail = cumulative(grid, g, tail=tail, warn=warn, floor=floor)
        self._a0 = self._anti(grid.t[0])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        self.grid.require(r)
        return self._anti(np.log(r)) - self._a0 + self.tail


def central_log_derivative(fun, r, step=1e-3):
    """r * d/dr fun at r by a second-order central difference in log r."""
    r = np.asarray(r, dtype=float)
    return (fun(r * np.exp(step)) - fun(r * np.exp(-step))) / (2 * step)


def fd_log_derivatives(values, h):
    """First and second t-derivatives on interior nodes (fourth-order stencils).

    Returns arrays for nodes ``2 .. n-3``.
    """
    f = np.asarray(values)
    d1 = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d2 = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * h * h)
    return d1, d2
