"""Command-line entry point: ``almgren-lab <subcommand> [flags]``.

Exit codes: 0 success, 1 verification failure or other error,
2 positivity violation, 3 nonconvergence, 4 no limit detected.
"""

import argparse
import sys
import warnings

import numpy as np

from . import config as C
from . import plotting
from .errors import AlmgrenLabError, NoLimitDetected, Nonconvergence, PositivityViolation, TailWarning
from .io import dumps, write_json, write_text

EXIT_OK, EXIT_FAIL, EXIT_POSITIVITY, EXIT_NONCONVERGENCE, EXIT_NO_LIMIT = 0, 1, 2, 3, 4


def _parse_radii(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise C.ConfigError(f"--radii must be a comma-separated list of numbers: {exc}") from exc
    if not vals or any(v <= 0 for v in vals):
        raise C.ConfigError("--radii needs positive values")
    return sorted(vals)


def load_config(args):
    cfg = C.load(args.config)
    if args.out is not None:
        cfg["output_dir"] = args.out
    if args.threads is not None:
        cfg["threads"] = args.threads
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.radii is not None:
        cfg["radii"]["values"] = _parse_radii(args.radii)
    return C.validate(cfg)


def _echo(cfg):
    write_text(cfg["output_dir"], "config.json", C.echo(cfg) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def run_spectrum(cfg):
    from .spectrum import check_positive_definiteness, compute_spectrum

    out = cfg["output_dir"]
    _echo(cfg)
    pot = C.build_potential(cfg)
    b = cfg["basis"]
    spec, quad, forms = compute_spectrum(pot, b["L"], b["k_max"] or None, b["resolution"] or None, cfg["threads"])
    write_text(out, "spectrum.csv", spec.to_csv())
    ok, margin = check_positive_definiteness(spec, pot.dimension)
    report = {
        "dimension": pot.dimension,
        "L": b["L"],
        "quadrature_points": quad.size,
        "eigenvalues": spec.eigenvalues,
        "pd_ok": ok,
        "pd_margin": margin,
        "hardy_inverse_below_one": ok,  # equivalent statement; the constant itself is not computed
        "hermitian_deviation": forms.asymmetry,
    }
    if ok:
        report["indicial_roots"] = spec.indicial_roots
    write_json(out, "spectrum.json", report)
    plotting.plot_spectrum(spec, out)
    if not ok:
        print(f"positivity violation: mu_1 = {spec.eigenvalues[0]:.6g}, margin {margin:.6g} <= 0", file=sys.stderr)
        return EXIT_POSITIVITY
    print(f"mu_1 = {spec.eigenvalues[0]:.12g}, sigma+_1 = {spec.sigma_plus[0]:.12g}, pd margin = {margin:.6g}")
    return EXIT_OK


def _profile_radii(cfg, grid):
    from .frequency import default_radii

    vals = cfg["radii"]["values"]
    return np.asarray(vals, float) if vals else default_radii(grid, cfg["radii"]["count"])


def _quotient_radii(cfg, R):
    q = cfg["quotients"]
    vals = cfg["radii"]["values"]
    return np.asarray(vals, float) if vals else np.geomspace(q["r_low_fraction"] * R, R, q["radii_count"])


def _ball_basis(cfg, setup):
    from .quotients import BallBasis

    q = cfg["quotients"]
    modes = min((cfg["basis"]["L_q"] + 1) ** 2, setup.spectrum.count)
    return BallBasis(setup.spectrum, setup.quad, modes, q["intervals"], q["inner_fraction"])


def _envelope(cfg, setup, radii):
    from .quotients import check_eta_hypotheses, compute_envelope

    env = compute_envelope(setup.pot, setup.h, radii, _ball_basis(cfg, setup))
    try:
        verdicts = check_eta_hypotheses(env)
    except AlmgrenLabError as exc:
        verdicts = {"inconclusive": f"{type(exc).__name__}: {exc}"}
    return env, verdicts


def _pohozaev(cfg, setup, fld, radii):
    from .quotients import pohozaev_residual

    rows = []
    for r in radii:
        res, terms = pohozaev_residual(fld, setup.pot, setup.h, setup.g, r)
        rows.append({"r": float(r), "residual": res, "terms": terms})
    return rows


def run_asymptotics(cfg):
    from .experiment import prepare, solve
    from .extraction import (
        beta_R_independence,
        blowup_trace,
        decade_annuli,
        extract_beta,
        halving_sequence,
        pointwise_bound,
    )
    from .frequency import check_H_scaling, estimate_gamma, frequency_N

    out = cfg["output_dir"]
    _echo(cfg)
    setup = prepare(cfg)
    write_text(out, "spectrum.csv", setup.spectrum.to_csv())
    fld = solve(setup)
    write_text(out, "field.csv", fld.to_csv())
    grid, R = setup.grid, setup.grid.R

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TailWarning)
        prof = frequency_N(fld, setup.pot, setup.h, setup.g, _profile_radii(cfg, grid), fit=False)
        gamma, fit_err = estimate_gamma(prof)
        K1, positive = check_H_scaling(prof, gamma)
        lead = extract_beta(fld, setup.h, setup.g, setup.spectrum, gamma=gamma)
        fractions = cfg["radii"]["beta_fractions"]
        dev, _ = beta_R_independence(fld, setup.h, setup.g, setup.spectrum, [f * R for f in fractions], gamma)
        lam = halving_sequence(cfg["radii"]["trace_start"] * R, 1.02 * grid.r_min)
        trace = blowup_trace(fld, lam, lead.gamma, lead)
        bound = pointwise_bound(fld, lead.gamma, decade_annuli(1.02 * grid.r_min, R / 1.02))
        poho = _pohozaev(cfg, setup, fld, [f * R for f in cfg["pohozaev"]["radii_fractions"]])
        env, verdicts = _envelope(cfg, setup, _quotient_radii(cfg, R))
    tail_warnings = sorted({str(w.message) for w in caught if issubclass(w.category, TailWarning)})

    write_text(out, "frequency.csv", prof.to_csv())
    freq = prof.summary(setup.spectrum, K1)
    freq.update({"gamma": gamma, "fit_error": fit_err, "positive_height_limit": positive})
    write_json(out, "frequency.json", freq)
    lt = lead.to_dict()
    lt.update({"R_fractions": fractions, "R_independence_deviation": dev, "trace": trace.to_dict(),
               "pointwise_bound": bound.to_dict()})
    write_json(out, "leading_term.json", lt)
    rows = ["lambda,e0,e1"] + [f"{a:.15e},{b:.15e},{c:.15e}" for a, b, c in zip(trace.lambdas, trace.e0, trace.e1)]
    write_text(out, "blowup.csv", "\n".join(rows) + "\n")
    write_json(out, "pohozaev.json", poho)
    write_text(out, "eta.csv", env.to_csv(verdicts if "eta0" in verdicts else None))
    write_json(out, "eta_verdicts.json", verdicts)

    summary = {
        "gamma": gamma,
        "k0": lead.k0,
        "eigenspace": list(lead.eigenspace),
        "sigma_plus_k0": lead.gamma,
        "betas": lead.betas,
        "max_beta_deviation_across_R": dev,
        "picard_iterations": fld.info.get("iterations"),
        "equation_residual": fld.info.get("equation_residual"),
        "max_pohozaev_residual": max(p["residual"] for p in poho),
        "eta_hypotheses_hold": verdicts.get("all_hold"),
        "tail_warnings": tail_warnings,
    }
    write_json(out, "summary.json", summary)
    plotting.plot_spectrum(setup.spectrum, out)
    plotting.plot_modes(fld, out)
    plotting.plot_profile(prof, out, gamma)
    plotting.plot_height_scaling(prof, gamma, out)
    plotting.plot_traces(trace, out)
    plotting.plot_envelope(env, out)
    its = "" if fld.info.get("iterations") is None else f", Picard iterations {fld.info['iterations']}"
    print(f"gamma = {gamma:.8g} (sigma+_{lead.k0} = {lead.gamma:.8g}), eigenspace {list(lead.eigenspace)}, "
          f"max beta deviation across R = {dev:.3e}{its}")
    return EXIT_OK


def run_quotients(cfg):
    from .experiment import prepare

    out = cfg["output_dir"]
    _echo(cfg)
    setup = prepare(cfg)
    env, verdicts = _envelope(cfg, setup, _quotient_radii(cfg, setup.grid.R))
    write_text(out, "eta.csv", env.to_csv(verdicts if "eta0" in verdicts else None))
    write_json(out, "eta_verdicts.json", verdicts)
    plotting.plot_envelope(env, out)
    print(dumps({k: verdicts[k]["holds"] for k in ("eta0", "eta1")} if "eta0" in verdicts else verdicts))
    return EXIT_OK


def run_pohozaev(cfg):
    from .experiment import prepare, solve

    out = cfg["output_dir"]
    _echo(cfg)
    setup = prepare(cfg)
    fld = solve(setup)
    R = setup.grid.R
    radii = cfg["radii"]["values"] or [f * R for f in cfg["pohozaev"]["radii_fractions"]]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailWarning)
        rows = _pohozaev(cfg, setup, fld, radii)
    write_json(out, "pohozaev.json", rows)
    for row in rows:
        print(f"r = {row['r']:.6g}: residual {row['residual']:.3e}")
    return EXIT_OK


def run_verify(cfg, repeat=True):
    from .verification import all_passed, run_all, summary

    results = run_all(cfg["tolerances"], cfg["threads"], cfg["seed"], repeat=repeat)
    text = summary(results)
    print(text)
    write_text(cfg["output_dir"], "verify.txt", text + "\n")
    _echo(cfg)
    if all_passed(results):
        return EXIT_OK
    failed = ", ".join(f"{r.number} ({r.name})" for r in results if not r.passed)
    print(f"failed criteria: {failed}", file=sys.stderr)
    return EXIT_FAIL


COMMANDS = {
    "spectrum": run_spectrum,
    "asymptotics": run_asymptotics,
    "quotients": run_quotients,
    "pohozaev": run_pohozaev,
    "verify": run_verify,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment configuration")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--threads", type=int, help="worker threads for assembly")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--radii", help="comma-separated radii overriding the schedule")
    parser = argparse.ArgumentParser(prog="almgren-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "spectrum": "angular eigenvalues, indicial roots and positivity margin",
        "asymptotics": "solve, frequency profile, leading term and full report",
        "quotients": "perturbation envelopes and hypothesis verdicts",
        "pohozaev": "Pohozaev balance of the solved field",
        "verify": "run the acceptance suite",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except PositivityViolation as exc:
        print(f"positivity violation: {exc}", file=sys.stderr)
        return EXIT_POSITIVITY
    except Nonconvergence as exc:
        print(f"nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except NoLimitDetected as exc:
        print(f"no limit detected: {exc}", file=sys.stderr)
        return EXIT_NO_LIMIT
    except AlmgrenLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
