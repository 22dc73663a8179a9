"""Config-driven construction of the objects an experiment needs, and the solve step."""

from dataclasses import dataclass

from . import config as C
from .field import solve_perturbed, solve_picard
from .spectrum import compute_spectrum


@dataclass
class Setup:
    cfg: dict
    pot: object
    spectrum: object
    quad: object
    grid: object
    h: object
    g: object
    boundary: dict
    K: int


def prepare(cfg, threads=None):
    """Spectrum, grid and data for ``cfg``; raises PositivityViolation when the angular operator is not positive."""
    pot = C.build_potential(cfg)
    b = cfg["basis"]
    spec, quad, _ = compute_spectrum(
        pot, b["L"], b["k_max"] or None, b["resolution"] or None, threads or cfg["threads"]
    )
    spec.indicial_roots  # positivity check
    K = min(b["K"], spec.count)
    boundary = C.boundary_modes(cfg)
    if max(boundary) > K:
        raise C.ConfigError(f"boundary mode {max(boundary)} exceeds the {K} carried modes")
    return Setup(cfg, pot, spec, quad, C.build_grid(cfg), C.build_perturbation(cfg), C.build_nonlinearity(cfg), boundary, K)


def solve(setup):
    """Linear radial solve when possible, Picard iteration otherwise."""
    h, g = setup.h, setup.g
    if g.is_zero and h.is_radial:
        return solve_perturbed(setup.spectrum, h, setup.boundary, setup.grid, setup.quad, setup.K)
    s = setup.cfg["solver"]
    return solve_picard(
        setup.spectrum, h, g, setup.boundary, setup.grid, setup.quad,
        damping=s["damping"], max_iter=s["max_iter"], K=setup.K, tol=s["tol"],
    )
