import json

import numpy as np
import pytest

from almgren_lab import cli
from almgren_lab import frequency
from almgren_lab.errors import NoLimitDetected


def _write(tmp_path, text):
    p = tmp_path / "cfg.toml"
    p.write_text(text)
    return str(p)


def test_spectrum_zero(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["spectrum", "--out", str(out)]) == 0
    first = (out / "spectrum.csv").read_text().splitlines()[1].split(",")
    assert float(first[1]) == 0.0 and float(first[2]) == 0.0
    echoed = json.loads((out / "config.json").read_text())
    assert echoed["output_dir"] == str(out) and echoed["seed"] == 42
    assert (out / "spectrum.png").exists()


def test_spectrum_positivity_exit(tmp_path):
    cfg = _write(tmp_path, '[potential]\nfamily = "constant_a"\nc = 0.3\n')
    out = tmp_path / "o"
    assert cli.main(["spectrum", "--config", cfg, "--out", str(out)]) == 2
    assert (out / "spectrum.csv").exists()
    assert json.loads((out / "spectrum.json").read_text())["pd_margin"] == pytest.approx(-0.05)


def test_spectrum_deterministic(tmp_path):
    cfg = _write(tmp_path, '[potential]\nfamily = "rotation_A"\nalpha = 0.5\n')
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["spectrum", "--config", cfg, "--out", str(a)])
    cli.main(["spectrum", "--config", cfg, "--out", str(b)])
    assert (a / "spectrum.csv").read_bytes() == (b / "spectrum.csv").read_bytes()
    assert (a / "spectrum.png").read_bytes() == (b / "spectrum.png").read_bytes()


def test_asymptotics_model_boundary(tmp_path, capsys):
    cfg = _write(tmp_path, "[boundary]\nmodes = [2]\nvalues = [1.0]\n")
    out = tmp_path / "o"
    assert cli.main(["asymptotics", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["gamma"] == pytest.approx(1.0, abs=1e-8)
    assert summary["k0"] == 2
    assert summary["betas"][0] == pytest.approx([1.0, 0.0], abs=1e-9)
    for name in ("frequency.csv", "leading_term.json", "blowup.csv", "pohozaev.json", "eta.csv", "field.csv"):
        assert (out / name).exists()
    assert "gamma = " in capsys.readouterr().out


def test_asymptotics_perturbed_and_nonlinear(tmp_path):
    cfg = _write(
        tmp_path,
        '[perturbation]\nfamily = "inverse_square_eps"\nc = 0.1\neps = 0.5\n'
        '[nonlinearity]\nfamily = "power"\np = 1.0\ncoupling = 1e-2\n',
    )
    out = tmp_path / "o"
    assert cli.main(["asymptotics", "--config", cfg, "--out", str(out)]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert abs(s["gamma"] - s["sigma_plus_k0"]) <= 1e-3
    assert 1 <= s["picard_iterations"] <= 30


def test_nonconvergence_exit(tmp_path):
    cfg = _write(
        tmp_path,
        '[perturbation]\nfamily = "inverse_square_eps"\nchi_amplitude = 0.3\n'
        '[nonlinearity]\nfamily = "power"\n[solver]\nmax_iter = 1\n',
    )
    assert cli.main(["asymptotics", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_no_limit_exit(tmp_path, monkeypatch):
    def boom(profile):
        raise NoLimitDetected("forced")

    monkeypatch.setattr(frequency, "estimate_gamma", boom)
    assert cli.main(["asymptotics", "--out", str(tmp_path / "o")]) == 4


def test_quotients_and_pohozaev(tmp_path, capsys):
    cfg = _write(tmp_path, '[perturbation]\nfamily = "inverse_square_eps"\n')
    out = tmp_path / "q"
    assert cli.main(["quotients", "--config", cfg, "--out", str(out)]) == 0
    v = json.loads((out / "eta_verdicts.json").read_text())
    assert v["all_hold"] is True
    out = tmp_path / "p"
    assert cli.main(["pohozaev", "--config", cfg, "--out", str(out), "--radii", "0.2,0.6"]) == 0
    rows = json.loads((out / "pohozaev.json").read_text())
    assert [r["r"] for r in rows] == [0.2, 0.6]
    assert max(r["residual"] for r in rows) <= 1e-5


def test_flags_override(tmp_path):
    args = cli.build_parser().parse_args(["spectrum", "--threads", "2", "--seed", "7", "--radii", "0.5, 0.1"])
    cfg = cli.load_config(args)
    assert cfg["threads"] == 2 and cfg["seed"] == 7 and cfg["radii"]["values"] == [0.1, 0.5]


def test_bad_radii_and_config(tmp_path, capsys):
    assert cli.main(["spectrum", "--radii", "a,b", "--out", str(tmp_path)]) == 1
    cfg = _write(tmp_path, "[nope]\nx = 1\n")
    assert cli.main(["spectrum", "--config", cfg]) == 1
    assert "unknown configuration key" in capsys.readouterr().err


def test_verify_tampered_tolerance(tmp_path, monkeypatch, capsys):
    from almgren_lab import verification

    monkeypatch.setattr(verification, "CHECKS", verification.CHECKS[:4])
    cfg = _write(tmp_path, "[tolerances]\nderivative_identity = 0.0\n")
    code = cli.main(["verify", "--config", cfg, "--out", str(tmp_path / "v")])
    captured = capsys.readouterr()
    assert code == 1
    assert "[FAIL]  4 derivative identity" in captured.out
    assert "4 (derivative identity)" in captured.err
