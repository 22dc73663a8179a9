"""Acceptance gate: every criterion at its stated tolerance, one line each.

The suite is run once per session (with the determinism re-run) and each
criterion is reported as its own test.
"""

import pytest

from almgren_lab.verification import TOLERANCES, run_all

NAMES = {
    1: "spectrum oracle",
    2: "indicial algebra",
    3: "constant frequency",
    4: "derivative identity",
    5: "monotonicity decomposition",
    6: "perturbed limit",
    7: "coefficient formula",
    8: "blow-up traces",
    9: "Pohozaev residual",
    10: "eta envelope",
    11: "nonlinear pipeline",
    12: "deterministic verify",
}


@pytest.fixture(scope="module")
def results():
    return {r.number: r for r in run_all(TOLERANCES, threads=1, seed=42, repeat=True)}


@pytest.mark.parametrize("number", sorted(NAMES))
def test_criterion(results, number, capsys):
    res = results[number]
    with capsys.disabled():
        print("\n" + res.line())
    assert res.name == NAMES[number]
    assert res.passed, res.line()
