import types

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almgren_lab.errors import (
    AccuracyWarning,
    DiscretizationFailure,
    InvalidArgumentError,
    InvalidPotentialError,
    PositivityViolation,
)
from almgren_lab.sphere import SpectralBasis, build_quadrature
from almgren_lab.spectrum import (
    AngularPotential,
    assemble_forms,
    check_positive_definiteness,
    compute_spectrum,
    constant_a,
    gradient_gauge,
    indicial_roots,
    load_potential_table,
    qlim,
    rotation_A,
    solve_spectrum,
    zero_potential,
)


def _forms(pot, L, res=None):
    basis = SpectralBasis(L)
    quad = build_quadrature(3, res or 2 * L + 12)
    return basis, assemble_forms(pot, basis, quad)


def test_free_stiffness_is_diagonal():
    basis, f = _forms(zero_potential(), 4)
    expected = basis.degrees * (basis.degrees + 1.0)
    assert np.max(np.abs(f.Q - np.diag(expected))) <= 1e-10


def test_constant_shift():
    _, f0 = _forms(zero_potential(), 4)
    _, fc = _forms(constant_a(0.7), 4)
    assert np.max(np.abs(fc.Q - (f0.Q - 0.7 * f0.M))) <= 1e-12


def test_rotation_hermitian():
    _, f = _forms(rotation_A(0.5), 8)
    assert f.asymmetry <= 1e-12
    assert np.max(np.abs(f.Q - f.Q.conj().T)) == 0.0


def test_free_eigenvalues():
    spec, _, _ = compute_spectrum(zero_potential(), 6, 9)
    assert np.allclose(spec.eigenvalues, [0, 2, 2, 2, 6, 6, 6, 6, 6], atol=1e-10)


def test_shifted_ground_state():
    spec, _, _ = compute_spectrum(constant_a(3.0), 4, 1)
    assert abs(spec.eigenvalues[0] + 3) <= 1e-10


def test_rotation_refinement():
    a, _, _ = compute_spectrum(rotation_A(0.5), 8, 1)
    b, _, _ = compute_spectrum(rotation_A(0.5), 12, 1)
    assert abs(a.eigenvalues[0] - b.eigenvalues[0]) <= 1e-6


def test_residuals_and_orthonormality():
    spec, quad, f = compute_spectrum(rotation_A(0.5), 8, 30)
    V = spec.eigenvectors
    assert np.max(spec.residual_norms) <= 1e-9 * np.linalg.norm(f.Q, 2)
    assert np.max(np.abs(V.conj().T @ f.M @ V - np.eye(V.shape[1]))) <= 1e-10


def test_cluster_phase_fix_deterministic():
    a, _, _ = compute_spectrum(zero_potential(), 5)
    b, _, _ = compute_spectrum(zero_potential(), 5)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)
    for col in a.eigenvectors.T:
        j = np.argmax(np.abs(col))
        assert abs(col[j].imag) <= 1e-14 and col[j].real > 0


def test_free_multiplicities():
    L = 8
    spec, _, _ = compute_spectrum(zero_potential(), L)
    sizes = [len(c) for c in spec.clusters]
    assert sizes[: L - 1] == [2 * l + 1 for l in range(L - 1)]


def test_gauge_invariance():
    base, _, _ = compute_spectrum(rotation_A(0.3), 12, 16)
    gauged, _, _ = compute_spectrum(gradient_gauge(1, rotation_A(0.3)), 12, 16)
    assert np.max(np.abs(base.eigenvalues - gauged.eigenvalues)) <= 5e-7


def test_rayleigh_bound(rng):
    spec, _, f = compute_spectrum(rotation_A(0.5), 6)
    n = f.Q.shape[0]
    for _ in range(100):
        c = rng.normal(size=n) + 1j * rng.normal(size=n)
        q = np.real(c.conj() @ f.Q @ c) / np.real(c.conj() @ f.M @ c)
        assert spec.eigenvalues[0] <= q + 1e-12


def test_transversality_rejected():
    radial_A = AngularPotential(3, lambda th: 0.2 * np.asarray(th), lambda th: np.zeros(len(th)))
    with pytest.raises(InvalidPotentialError):
        _forms(radial_A, 2)


def test_coarse_quadrature_warns():
    basis = SpectralBasis(6)
    with pytest.warns(AccuracyWarning):
        assemble_forms(zero_potential(), basis, build_quadrature(3, 6))


def test_solver_rejections():
    _, f = _forms(zero_potential(), 2)
    with pytest.raises(InvalidArgumentError):
        solve_spectrum(f.Q, f.M, 100)
    with pytest.raises(DiscretizationFailure):
        solve_spectrum(f.Q, -f.M, 3)


@pytest.mark.parametrize("mu,N,expected", [(0.0, 3, (0, -1)), (2.0, 3, (1, -2)), (0.0, 5, (0, -3))])
def test_indicial_examples(mu, N, expected):
    assert indicial_roots(mu, N)[0] == pytest.approx(expected, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.25 + 1e-9, 1e3), st.integers(3, 7))
def test_indicial_algebra(mu, N):
    h2 = ((N - 2) / 2) ** 2
    if mu + h2 <= 1e-9:
        return
    sp, sm = indicial_roots(mu, N)[0]
    assert abs(sp + sm + (N - 2)) <= 1e-12 * max(1, abs(mu))
    assert abs(sp * sm + mu) <= 1e-12 * max(1, abs(mu))


def test_indicial_monotone_and_positivity():
    spec, _, _ = compute_spectrum(rotation_A(0.5), 6)
    assert np.all(np.diff(spec.sigma_plus) >= -1e-14)
    bad, _, _ = compute_spectrum(constant_a(0.25), 2, 1)
    with pytest.raises(PositivityViolation):
        bad.indicial_roots


def test_positive_definiteness():
    spec, _, _ = compute_spectrum(zero_potential(), 4, 1)
    assert check_positive_definiteness(spec, 3) == (True, pytest.approx(0.25))
    edge, _, _ = compute_spectrum(constant_a(0.25), 4, 1)
    ok, margin = check_positive_definiteness(edge, 3)
    assert not ok and abs(margin) < 1e-12
    fake = types.SimpleNamespace(eigenvalues=np.array([-0.5]))
    assert check_positive_definiteness(fake, 4) == (True, pytest.approx(0.5))


def test_qlim():
    assert qlim(0, 3) == pytest.approx(18)
    assert qlim(1 - 1e-9, 3) == pytest.approx(6, rel=1e-8)
    assert qlim(0.5, 4) == pytest.approx(8)
    for bad in (1.0, -0.1):
        with pytest.raises(InvalidArgumentError):
            qlim(bad, 3)


def test_potential_table_matches_builtin(tmp_path):
    colat = np.linspace(0, np.pi, 41)
    lon = np.linspace(0, 2 * np.pi, 80, endpoint=False)
    rows = []
    alpha = 0.5
    for c in colat:
        for p in lon:
            # rotation field alpha (-y, x, 0) has only an azimuthal component alpha sin(colat)
            rows.append((c, p, 0.0, alpha * np.sin(c), 0.1))
    path = tmp_path / "pot.txt"
    np.savetxt(path, rows)
    tab, _, _ = compute_spectrum(load_potential_table(path), 6, 4)
    ref, _, _ = compute_spectrum(rotation_A(alpha, 0.1), 6, 4)
    assert np.max(np.abs(tab.eigenvalues - ref.eigenvalues)) <= 1e-4


def test_spectrum_csv():
    spec, _, _ = compute_spectrum(zero_potential(), 2)
    lines = spec.to_csv().splitlines()
    assert lines[0] == "k,mu_k,sigma_plus,sigma_minus,residual"
    k, mu, sp, sm, _ = lines[1].split(",")
    assert (int(k), float(mu), float(sp), float(sm)) == (1, 0.0, 0.0, -1.0)
