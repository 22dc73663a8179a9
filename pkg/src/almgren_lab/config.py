"""Experiment configuration: TOML input, strict validation, builders.

Every key has a default; unknown keys are rejected and the fully
materialized configuration is echoed next to the outputs so a run can be
reproduced from its output directory alone.
"""

import copy
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

DEFAULTS = {
    "seed": 42,
    "threads": 1,
    "output_dir": "almgren-out",
    "potential": {
        "family": "zero",  # zero | constant_a | rotation_A | gradient_gauge | table
        "dimension": 3,
        "c": 0.0,
        "alpha": 0.0,
        "phi_id": 0,
        "table": "",
    },
    "basis": {
        "L": 6,
        "L_q": 2,
        "resolution": 0,  # 0 selects the default for L
        "k_max": 0,  # 0 keeps the whole basis
        "K": 16,  # modes carried by the solved field
    },
    "grid": {"r_min_factor": 1e-4, "R": 1.0, "count": 801},
    "perturbation": {
        "family": "zero",  # zero | inverse_square_eps | radial_table
        "c": 0.1,
        "eps": 0.5,
        "chi_amplitude": 0.0,
        "table": "",
    },
    "nonlinearity": {
        "family": "zero",  # zero | power
        "p": 1.0,
        "coupling": 1.0,
        "weight": 0.0,
    },
    "boundary": {"modes": [1], "values": [1.0], "imag": [0.0]},
    "solver": {"damping": 1.0, "max_iter": 30, "tol": 1e-8},
    "radii": {
        "values": [],  # explicit profile radii; empty selects a log schedule
        "count": 49,
        "beta_fractions": [1.0, 0.7, 0.5],
        "trace_start": 0.5,
    },
    "quotients": {
        "intervals": 12,
        "inner_fraction": 1e-3,
        "radii_count": 9,
        "r_low_fraction": 0.01,
    },
    "pohozaev": {"radii_fractions": [0.1, 0.5, 0.9]},
    "tolerances": {},
}

FAMILIES = {
    ("potential", "family"): {"zero", "constant_a", "rotation_A", "gradient_gauge", "table"},
    ("perturbation", "family"): {"zero", "inverse_square_eps", "radial_table"},
    ("nonlinearity", "family"): {"zero", "power"},
}


def _merge(defaults, given, path):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = ".".join(path + [key])
        if key not in defaults:
            raise ConfigError(f"unknown configuration key '{where}'")
        ref = defaults[key]
        if isinstance(ref, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}' must be a table")
            if path == [] and key == "tolerances":
                out[key] = _check_tolerances(value)
            else:
                out[key] = _merge(ref, value, path + [key])
        else:
            out[key] = _coerce(ref, value, where)
    return out


def _coerce(ref, value, where):
    if isinstance(ref, bool):
        ok = isinstance(value, bool)
    elif isinstance(ref, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(ref, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(ref, list):
        ok = isinstance(value, list)
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"'{where}' has the wrong type ({type(value).__name__})")
    return value


def _check_tolerances(values):
    from .verification import TOLERANCES

    out = {}
    for k, v in values.items():
        if k not in TOLERANCES:
            raise ConfigError(f"unknown tolerance '{k}'")
        if not isinstance(v, (int, float)) or v < 0:
            raise ConfigError(f"tolerance '{k}' must be a nonnegative number")
        out[k] = float(v)
    return out


def validate(cfg):
    for (section, key), allowed in FAMILIES.items():
        if cfg[section][key] not in allowed:
            raise ConfigError(f"{section}.{key} must be one of {sorted(allowed)}")
    b = cfg["boundary"]
    if not len(b["modes"]) == len(b["values"]):
        raise ConfigError("boundary.modes and boundary.values differ in length")
    if b["imag"] and len(b["imag"]) not in (1, len(b["modes"])) and b["imag"] != [0.0]:
        raise ConfigError("boundary.imag must be empty or match boundary.modes")
    if cfg["potential"]["dimension"] != 3:
        raise ConfigError("only dimension 3 is discretized")
    if cfg["basis"]["L"] < 0 or cfg["basis"]["L_q"] < 0 or cfg["basis"]["L_q"] > cfg["basis"]["L"]:
        raise ConfigError("need 0 <= basis.L_q <= basis.L")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be positive")
    return cfg


def materialize(given=None):
    return validate(_merge(DEFAULTS, given or {}, []))


def load(path=None):
    if path is None:
        return materialize({})
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return materialize(data)


def echo(cfg):
    return json.dumps(cfg, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# builders


def build_potential(cfg):
    from . import spectrum as S

    p = cfg["potential"]
    fam = p["family"]
    if fam == "zero":
        return S.zero_potential()
    if fam == "constant_a":
        return S.constant_a(p["c"])
    if fam == "rotation_A":
        return S.rotation_A(p["alpha"], p["c"])
    if fam == "gradient_gauge":
        return S.gradient_gauge(p["phi_id"])
    return S.load_potential_table(p["table"])


def build_perturbation(cfg):
    from . import field as F

    p = cfg["perturbation"]
    if p["family"] == "zero":
        return F.zero_perturbation()
    if p["family"] == "inverse_square_eps":
        return F.inverse_square_eps(p["c"], p["eps"], p["chi_amplitude"])
    return F.radial_table(p["table"])


def build_nonlinearity(cfg):
    from . import field as F

    p = cfg["nonlinearity"]
    if p["family"] == "zero":
        return F.zero_nonlinearity()
    return F.power_nonlinearity(p["p"], p["coupling"], p["weight"])


def build_grid(cfg):
    from .radial import RadialGrid

    g = cfg["grid"]
    return RadialGrid.default(g["R"], g["r_min_factor"], g["count"])


def boundary_modes(cfg):
    b = cfg["boundary"]
    imag = b["imag"] if len(b["imag"]) == len(b["modes"]) else [0.0] * len(b["modes"])
    return {int(k): complex(v, w) for k, v, w in zip(b["modes"], b["values"], imag)}
