import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almgren_lab.errors import InvalidArgumentError, InvalidExponent
from almgren_lab.extraction import (
    beta_all_modes,
    beta_R_independence,
    blowup_trace,
    decade_annuli,
    extract_beta,
    halving_sequence,
    leading_index,
    pointwise_bound,
    report_json,
)
from almgren_lab.field import FourierRadialField, solve_perturbed, synthesize_model_solution


def test_homogeneous_coefficient(base):
    spec, quad, grid = base
    fld = synthesize_model_solution(spec, 3, 1.0, grid, quad, 9)
    lead = extract_beta(fld, None, None, spec)
    assert lead.k0 == 2 and lead.eigenspace == (2, 3, 4)
    assert np.allclose(lead.betas, [0, 1, 0], atol=1e-9)
    assert lead.nontrivial


def test_linearity_in_u(base):
    spec, quad, grid = base
    fld = synthesize_model_solution(spec, 2, 1.0, grid, quad, 9)
    a = extract_beta(fld, None, None, spec)
    b = extract_beta(fld.scaled(2 + 1j), None, None, spec)
    assert np.allclose(b.betas, (2 + 1j) * a.betas, atol=1e-14)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False), min_size=3, max_size=3))
def test_planted_recovery(base, coeffs):
    spec, quad, grid = base
    if max(abs(c) for c in coeffs) < 1e-3:
        return
    fld = solve_perturbed(spec, None, {2: coeffs[0], 3: coeffs[1], 4: coeffs[2]}, grid, quad, 9)
    lead = extract_beta(fld, None, None, spec, gamma=1.0)
    assert np.max(np.abs(lead.betas - np.array(coeffs))) <= 1e-9


def test_R_independence(perturbed):
    fld, h = perturbed
    dev, terms = beta_R_independence(fld, h, None, fld.spectrum, [1.0, 0.7, 0.5])
    assert dev <= 1e-4
    assert all(t.nontrivial for t in terms)
    # the perturbation moves beta away from the plain boundary value
    assert abs(terms[0].betas[0] - 1.0) > 1e-3


def test_invalid_exponent(perturbed):
    fld, h = perturbed
    with pytest.raises(InvalidExponent):
        beta_all_modes(fld, h, None, -0.6, 1.0)
    with pytest.raises(InvalidArgumentError):
        beta_all_modes(fld, h, None, 0.0, 2.0)


def test_leading_index(base):
    spec = base[0]
    sigma, k0, cluster = leading_index(spec, 2.01)
    assert sigma == pytest.approx(2.0) and k0 == 5 and cluster == (5, 6, 7, 8, 9)


def test_homogeneous_traces(base):
    spec, quad, grid = base
    fld = synthesize_model_solution(spec, 6, 1.0, grid, quad, 16)
    lead = extract_beta(fld, None, None, spec)
    tr = blowup_trace(fld, halving_sequence(0.5, 1e-3), lead.gamma, lead)
    assert np.max(tr.e0) <= 1e-8
    assert np.max(tr.e1) <= 1e-6


def test_perturbed_traces(perturbed):
    fld, h = perturbed
    lead = extract_beta(fld, h, None, fld.spectrum)
    lam = halving_sequence(0.5, 1.02 * fld.grid.r_min)
    tr = blowup_trace(fld, lam, lead.gamma, lead)
    assert tr.monotone0 and tr.monotone1
    assert tr.e0[-1] <= 1e-3 and tr.e1[-1] <= 1e-3
    assert tr.rate0 > 0


def test_pointwise_bound(base, perturbed):
    spec, quad, grid = base
    fld = synthesize_model_solution(spec, 2, 1.0, grid, quad, 9)
    ann = decade_annuli(1e-3, 1.0)
    pb = pointwise_bound(fld, 1.0, ann)
    assert pb.uniform
    assert pb.C == pytest.approx(np.max(np.abs(spec.psi_values(quad.nodes, 2)[:, 1])), rel=1e-12)
    assert pointwise_bound(fld.scaled(5), 1.0, ann).C == pytest.approx(5 * pb.C, rel=1e-12)
    pf = solve_perturbed(spec, perturbed[1], {1: 1.0}, grid, quad, 9)
    pp = pointwise_bound(pf, 0.0, ann)
    assert pp.uniform and np.isfinite(pp.C)
    with pytest.raises(InvalidArgumentError):
        pointwise_bound(fld, 1.0, [(0.5, 0.1)])


def test_consistency_chain(perturbed):
    """beta reproduces the trace limit: e0 at the smallest lambda is small relative to |beta|."""
    fld, h = perturbed
    lead = extract_beta(fld, h, None, fld.spectrum)
    lam = np.array([2e-4])
    tr = blowup_trace(fld, lam, lead.gamma, lead)
    assert tr.e0[0] <= 1e-3 * np.max(np.abs(lead.betas)) * 10


def test_helpers_and_report(perturbed):
    seq = halving_sequence(1.0, 0.1)
    assert np.allclose(seq, [1, 0.5, 0.25, 0.125])
    assert decade_annuli(1e-3, 0.5) == [(1e-3, 1e-2), (1e-2, 1e-1), (1e-1, 0.5)]
    fld, h = perturbed
    lead = extract_beta(fld, h, None, fld.spectrum)
    data = json.loads(report_json(lead, r_deviation=1e-12))
    assert data["k0"] == 1 and data["eigenspace"] == [1] and len(data["betas"]) == 1


def test_zero_field_rejected(base):
    spec, quad, grid = base
    fld = FourierRadialField(spec, quad, grid, spec.sigma_plus[:4], np.zeros((grid.count, 4), complex))
    with pytest.raises(InvalidArgumentError):
        extract_beta(fld, None, None, spec)
