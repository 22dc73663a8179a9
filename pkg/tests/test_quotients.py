import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almgren_lab.errors import InconclusiveFit, InvalidArgumentError, PositivityViolation
from almgren_lab.field import (
    constant_h,
    inverse_square_eps,
    power_nonlinearity,
    solve_perturbed,
    solve_picard,
    synthesize_model_solution,
    zero_perturbation,
)
from almgren_lab.quotients import (
    BallBasis,
    QuotientEnvelope,
    _largest,
    assemble_ball_forms,
    check_eta_hypotheses,
    compute_envelope,
    corrupted_copy,
    eta,
    fit_power,
    pohozaev_json,
    pohozaev_residual,
)
from almgren_lab.radial import RadialGrid
from almgren_lab.spectrum import compute_spectrum, constant_a, rotation_A

RADII = np.geomspace(0.01, 1.0, 9)


@pytest.fixture(scope="module")
def ball(base):
    spec, quad, _ = base
    return BallBasis(spec, quad)


def test_zero_perturbation(ball):
    f = assemble_ball_forms(None, zero_perturbation(), 0.5, ball)
    assert not np.any(f.Num0) and not np.any(f.Num1)
    assert eta(0.5, 0, None, zero_perturbation(), ball) == 0.0


def test_constant_function_boundary_term(ball):
    r = 0.3
    f = assemble_ball_forms(None, None, r, ball)
    c = np.zeros(ball.count)
    c[:: ball.angular_modes] = np.sqrt(4 * np.pi)  # u = 1
    assert np.real(c @ f.Den @ c) == pytest.approx(2 * np.pi * r, rel=1e-12)


def test_generic_forms_hermitian_pd():
    spec, quad, _ = compute_spectrum(rotation_A(0.5), 6)
    basis = BallBasis(spec, quad)
    f = assemble_ball_forms(None, inverse_square_eps(0.2, 0.5, 0.3), 0.4, basis)
    for M in (f.Num0, f.Num1, f.Den):
        assert np.max(np.abs(M - M.conj().T)) <= 1e-12 * np.max(np.abs(M))
    assert np.linalg.eigvalsh(f.Den).min() > 0


def test_constant_h_lower_bound(ball):
    c, r = 0.7, 0.4
    assert eta(r, 0, None, constant_h(c), ball) >= 2 * c * r**2 / 3 * (1 - 1e-12)


def test_refinement_and_scaling(ball):
    h = inverse_square_eps(1.0, 0.5)
    env = compute_envelope(None, h, RADII, ball)
    assert np.max(env.gap0) <= 0.05
    _, p, _ = fit_power(RADII[-5:], env.eta0[-5:])
    assert p == pytest.approx(0.5, abs=0.05)


def test_nested_monotonicity(base):
    spec, quad, _ = base
    h = inverse_square_eps(1.0, 0.5, 0.3)
    b1 = BallBasis(spec, quad, 4, 6)
    b2 = b1.refined(9)
    b3 = b2.refined(16)
    for which in (0, 1):
        vals = [eta(0.5, which, None, h, b) for b in (b1, b2, b3)]
        assert vals[0] <= vals[1] * (1 + 1e-12) and vals[1] <= vals[2] * (1 + 1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_homogeneity(ball, t):
    h = inverse_square_eps(1.0, 0.5)
    a = eta(0.2, 0, None, h, ball)
    assert eta(0.2, 0, None, h.scaled(t), ball) == pytest.approx(t * a, rel=1e-12)


def test_fast_path_matches_full(ball):
    h = inverse_square_eps(1.0, 0.5)
    f = assemble_ball_forms(None, h, 0.3, ball)
    for which, num in ((0, f.Num0), (1, f.Num1)):
        assert eta(0.3, which, None, h, ball) == pytest.approx(_largest(num, f.Den), rel=1e-10)


@pytest.mark.parametrize("eps,p,holds", [(0.5, 0.5, True), (0.0, 0.0, False)])
def test_hypothesis_verdicts(ball, eps, p, holds):
    env = compute_envelope(None, inverse_square_eps(1.0, eps), RADII, ball, refine=False)
    rep = check_eta_hypotheses(env)
    assert rep["eta0"]["exponent"] == pytest.approx(p, abs=0.05)
    assert rep["all_hold"] is holds
    assert rep["eta0"]["vanishes"] is holds


def test_constant_h_verdict(ball):
    env = compute_envelope(None, constant_h(1.0), RADII, ball, refine=False)
    rep = check_eta_hypotheses(env)
    assert rep["eta0"]["exponent"] == pytest.approx(2.0, abs=0.05)
    assert rep["eta1"]["holds"]  # x . grad h = 0
    assert rep["all_hold"]


def test_checker_preconditions():
    r = np.geomspace(0.1, 1, 9)
    z = np.zeros_like(r)
    with pytest.raises(InvalidArgumentError):
        check_eta_hypotheses(QuotientEnvelope(r, r, r, z, z))
    r = np.geomspace(0.01, 1, 9)
    wild = np.exp(np.sin(8 * np.log(r)) * 3)
    with pytest.raises(InconclusiveFit):
        check_eta_hypotheses(QuotientEnvelope(r, wild, wild, z, z))


def test_positivity_violation(base):
    spec, quad, _ = compute_spectrum(constant_a(0.3), 4)
    with pytest.raises(PositivityViolation):
        assemble_ball_forms(None, None, 0.5, BallBasis(spec, quad))


def test_envelope_csv(ball):
    env = compute_envelope(None, inverse_square_eps(1.0, 0.5), RADII, ball, refine=False)
    rep = check_eta_hypotheses(env)
    lines = env.to_csv(rep).splitlines()
    assert lines[0].startswith("r,eta0,eta1,fit_exponent0")
    assert len(lines) == 1 + RADII.size


def test_pohozaev_homogeneous(base):
    spec, quad, grid = base
    for k in (1, 2, 5, 10):
        fld = synthesize_model_solution(spec, k, 1.0, grid, quad, 16)
        for r in (0.05, 0.5):
            assert pohozaev_residual(fld, None, None, None, r)[0] <= 1e-7


def test_pohozaev_perturbed_refinement(base, perturbed):
    spec, quad, _ = base
    fld, h = perturbed
    assert pohozaev_residual(fld, None, h, None, 0.5)[0] <= 1e-5
    res = []
    for count in (61, 121):
        f = solve_perturbed(spec, h, {1: 1.0, 3: 0.5}, RadialGrid.default(1.0, 1e-4, count), quad, 16)
        res.append(pohozaev_residual(f, None, h, None, 0.5)[0])
    assert np.log2(res[0] / res[1]) >= 2


def test_pohozaev_nonlinear(base):
    spec, quad, grid = base
    g = power_nonlinearity(1, 1.0)
    h = inverse_square_eps(0.1, 0.5, 0.3)
    fld = solve_picard(spec, h, g, {1: 0.05, 2: 0.02}, grid, quad, K=9)
    res, terms = pohozaev_residual(fld, None, h, g, 0.4)
    assert res <= 1e-5
    assert terms["G_surface"] != 0 and terms["h_surface"] != 0


def test_pohozaev_negative_control(perturbed):
    fld, h = perturbed
    res, terms = pohozaev_residual(corrupted_copy(fld), None, h, None, 0.5)
    assert res > 1e-2
    data = json.loads(pohozaev_json(res, terms, 0.5))
    assert set(data["terms"]) == set(terms)
