"""Run configuration: explicit defaults, presets and schema validation.

A run configuration is a nested mapping per subcommand. Every key has a
default here; documents loaded from YAML may only override existing keys.
All quantities are in oscillator units (hbar = m = omega = 1).
"""
import copy
import math

import yaml

from .errors import InvalidInput
from .moments import FIG1_INITIAL

DEFAULTS = {
    "steady": {
        "kappa": 0.25,
        "kappa_grid": None,  # "start:stop:log|lin:n"
    },
    "moments": {
        "kappa": 0.25,
        "initial": {"x": 0.5, "y": 0.5, "z": 0.0},
        "tau_end": 50.0,
        "dtau": 1e-3,
        "record_stride": 100,
    },
    "ensemble": {
        "kappa": 0.25,
        "n_traj": 100,
        "seed": 20240611,
        "dtau": 1e-3,
        "tau_end": 60.0,
        "scheme": "weak2",
        "gains": {"mode": "optimal", "u_tilde": 0.0, "v_tilde": 0.0},
        "initial": {"Qbar": 0.0, "Pbar": 1.0, "x": 0.5, "y": 0.5, "z": 0.0},
        "record_stride": 100,
        "budget": 2_000_000_000,
    },
    "grid": {
        "kappa": 0.25,
        "gains": {"mode": "zero", "chi": 0.0, "delta": 0.0},
        "potential": {"kind": "harmonic", "a4": 0.0, "a2": 0.0},
        "n_traj": 1,
        "seed": 0,
        "dt": 1e-3,
        "tau_end": 20.0,
        "n_points": 1024,
        "half_width": 12.0,
        "record_stride": 100,
        "snapshot_stride": 2000,
        "leak_threshold": 1e-6,
        "initial": {"qbar": 2.0, "pbar": 0.0, "width": math.sqrt(0.5), "cov": 0.0},
    },
    "fock": {
        "kappa": 0.01,
        "form": "rwa",
        "gains": {"u": 0.0, "v": -0.02},
        "n_max": 30,
        "t_end": 400.0,
        "dt": 0.1,
        "record_stride": 10,
        "initial": {"kind": "fock", "n": 1.0},
    },
    "design": {
        "kappa": 0.25,
        "gains": {"mode": "optimal", "u": 0.0, "v": 0.0},
        "omega_si": None,  # rad/s; enables the kelvin column
    },
}

_FIG1 = {"x": FIG1_INITIAL.x, "y": FIG1_INITIAL.y, "z": FIG1_INITIAL.z}

PRESETS = {
    "moments": {
        "fig1": {"kappa": 0.25, "initial": _FIG1, "tau_end": 50.0, "dtau": 1e-3, "record_stride": 100},
    },
    "ensemble": {
        "fig3": {"kappa": 0.25, "n_traj": 100, "seed": 20240611, "tau_end": 60.0,
                 "gains": {"mode": "optimal"},
                 "initial": dict(Qbar=0.0, Pbar=1.0, **_FIG1)},
    },
    "grid": {
        # (a) no measurement: a squeezed, displaced packet breathes at 2 omega
        "fig4a": {"kappa": 0.0, "gains": {"mode": "zero"},
                  "initial": {"qbar": 2.0, "pbar": 0.0, "width": 0.5, "cov": 0.0}},
        "fig4b": {"kappa": 0.25, "gains": {"mode": "zero"},
                  "initial": {"qbar": 2.0, "pbar": 0.0, "width": math.sqrt(0.5), "cov": 0.0}},
        "fig4c": {"kappa": 0.25, "gains": {"mode": "optimal"}, "initial": "stationary"},
    },
    "fock": {
        "thermal-check": {"kappa": 0.01, "form": "rwa", "gains": {"u": 0.0, "v": -0.02},
                          "n_max": 30, "t_end": 400.0, "dt": 0.1,
                          "initial": {"kind": "fock", "n": 1.0}},
    },
}


def _merge(base, override, path=""):
    """Deep-merge ``override`` into a copy of ``base``; unknown keys raise."""
    if not isinstance(override, dict):
        raise InvalidInput(f"expected a mapping at '{path or '<root>'}'")
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise InvalidInput(f"unknown configuration key '{where}'")
        if isinstance(base[key], dict):
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = _coerce(base[key], val, where)
    return out


def _coerce(default, val, where):
    if val is None or default is None:
        return val
    try:
        if isinstance(default, bool):
            return bool(val)
        if isinstance(default, int):
            if isinstance(val, float) and not val.is_integer():
                raise ValueError
            return int(val)
        if isinstance(default, float):
            return float(val)
        if isinstance(default, str):
            return str(val)
    except (TypeError, ValueError):
        raise InvalidInput(f"bad value {val!r} for '{where}'") from None
    return val


def _stationary_initial(kappa):
    from .moments import stationary_moments

    x, _, z = stationary_moments(kappa)
    return {"qbar": 2.0, "pbar": 0.0, "width": math.sqrt(x), "cov": z}


def resolve(command, preset=None, document=None, overrides=None):
    """Defaults, then preset, then YAML document, then flag overrides."""
    if command not in DEFAULTS:
        raise InvalidInput(f"unknown command {command!r}")
    conf = copy.deepcopy(DEFAULTS[command])
    if preset is not None:
        table = PRESETS.get(command, {})
        if preset not in table:
            known = ", ".join(sorted(table)) or "none"
            raise InvalidInput(f"unknown preset {preset!r} for {command} (available: {known})")
        p = copy.deepcopy(table[preset])
        if p.get("initial") == "stationary":
            p["initial"] = _stationary_initial(p["kappa"])
        conf = _merge(conf, p)
    if document is not None:
        conf = _merge(conf, document)
    if overrides:
        conf = _merge(conf, {k: v for k, v in overrides.items() if v is not None})
    return conf


def load_document(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from None
    return {} if doc is None else doc


def dump(conf):
    return yaml.safe_dump(conf, sort_keys=True, default_flow_style=False)
