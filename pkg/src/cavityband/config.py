"""Run configuration: defaults, TOML/JSON loading, overrides and validation.

A configuration is a two-level mapping ``section -> key -> value``. Values
are merged in the order defaults, preset, config file, command-line
overrides; unknown sections or keys are rejected. Zero means "off" for the
optional numeric knobs (``evolve.cut``, ``evolve.track_width``,
``ramp.T_ramp``, ``state.delta_k``, ``extract.t_end``).
"""

from __future__ import annotations

import copy
import json
import math
import sys
from importlib import resources
from pathlib import Path

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULTS = {
    "model": {"g0": 0.05, "delta": 0.0, "q": 1.0, "n_photons": 1},
    "truncation": {"n_states": 201},
    "grid": {"n_points": 8192, "x_min": -4000.0, "x_max": 4000.0},
    "state": {
        "kind": "bare",
        "k0": 0.25,
        "delta_k": 0.0,
        "delta_x2": 2500.0,
        "x0": 0.0,
        "component": "-",
        "band": 1,
        "n_states": 21,
    },
    "evolve": {
        "dt": 0.05,
        "steps": 20000,
        "stride": 20,
        "splitting": "strang",
        "cut": 0.0,
        "track_width": 0.0,
        "momentum_every": 0,
        "snapshot_every": 0,
        "snapshot_step": 8,
    },
    "cavity": {"kind": "uniform", "x_l": 1500.0, "x_e": 50.0},
    "ramp": {"shape": "sin2", "T_ramp": 0.0},
    "extract": {
        "velocity": False,
        "m2": False,
        "fit_teff": False,
        "rabi": False,
        "which": "auto",
        "t_start": 0.0,
        "t_end": 0.0,
    },
    "bands": {"n_k": 401, "num_bands": 6, "coeff_k": []},
    "masses": {"k0": 0.25, "band": 1, "fd_step": 1e-3, "sweep": False},
    "map": {
        "g0_min": 0.0,
        "g0_max": 0.5,
        "n_g0": 26,
        "delta_min": -1.0,
        "delta_max": 1.0,
        "n_delta": 41,
        "k": 0.25,
        "band": 1,
        "mu": 0,
        "n_small": 5,
        "n_ref": 201,
    },
    "scatter": {
        "t_max": 10000.0,
        "residual_tol": 1e-3,
        "settle_tol": 2e-4,
        "check_every": 100,
        "transparency": False,
        "sectors": "none",
        "p_coupled": 0.5,
    },
    "sweep": {"command": "propagate", "workers": 1, "grid": {}},
    "output": {"dir": "out", "formats": ["csv", "json", "svg"]},
}

CHOICES = {
    ("state", "kind"): ("bare", "dressed"),
    ("state", "component"): ("+", "-"),
    ("evolve", "splitting"): ("strang", "lie"),
    ("cavity", "kind"): ("uniform", "enveloped"),
    ("ramp", "shape"): ("sin2", "linear"),
    ("extract", "which"): ("auto", "total", "lower"),
    ("scatter", "sectors"): ("none", "atom", "photon"),
    ("sweep", "command"): ("bands", "masses", "error-map", "fidelity-map", "propagate", "scatter", "velocity", "mass"),
}

FORMATS = ("csv", "json", "svg")


def _coerce(section, key, value, default):
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ConfigError(f"{where} must be a boolean, got {value!r}")
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{where} must be a finite number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        choices = CHOICES.get((section, key))
        if choices and value not in choices:
            raise ConfigError(f"{where} must be one of {', '.join(choices)}; got {value!r}")
        return value
    if isinstance(default, list) and (section, key) == ("output", "formats"):
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{where} must be a list of strings")
        bad = [v for v in value if v not in FORMATS]
        if bad:
            raise ConfigError(f"{where}: unknown format(s) {bad}")
        return value
    if isinstance(default, list):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in value
        ):
            raise ConfigError(f"{where} must be a list of numbers")
        return [float(v) for v in value]
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{where} must be a table")
        return value
    raise ConfigError(f"{where}: unsupported value {value!r}")


def merge(base: dict, update: dict, origin: str = "config") -> dict:
    """Return ``base`` updated section by section; unknown keys raise."""
    out = copy.deepcopy(base)
    for section, entries in update.items():
        if section not in DEFAULTS:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        if not isinstance(entries, dict):
            raise ConfigError(f"{origin}: [{section}] must be a table")
        for key, value in entries.items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"{origin}: unknown key {section}.{key}")
            out[section][key] = _coerce(section, key, value, DEFAULTS[section][key])
    return out


def parse_text(text: str, name: str = "<config>") -> dict:
    """TOML, or JSON (optionally a summary file with a top-level "config")."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{name}: invalid JSON: {exc}") from None
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        return data
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{name}: invalid TOML: {exc}") from None


def load_file(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_text(text, str(path))


def preset_names() -> list[str]:
    files = resources.files("cavityband").joinpath("presets").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".toml"))


def load_preset(name: str) -> dict:
    res = resources.files("cavityband").joinpath("presets", f"{name}.toml")
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return parse_text(res.read_text(encoding="utf-8"), f"preset {name}")


def parse_value(text: str):
    """Interpret an override value as a TOML scalar/array, else a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def parse_overrides(tokens: list[str]) -> dict:
    """``--section.key=value`` (or ``--section.key value``) tokens to a nested dict."""
    out: dict = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(f"unrecognized argument {tok!r}; overrides look like --section.key=value")
        body = tok[2:]
        if "=" in body:
            name, value = body.split("=", 1)
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"override {tok} has no value")
            name, value = body, tokens[i + 1]
            i += 1
        section, _, key = name.partition(".")
        if not section or not key:
            raise ConfigError(f"bad override name {name!r}")
        out.setdefault(section, {})[key] = parse_value(value)
        i += 1
    return out


def resolve(preset: str | None = None, config_path=None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if preset:
        cfg = merge(cfg, load_preset(preset), f"preset {preset}")
    if config_path:
        cfg = merge(cfg, load_file(config_path), str(config_path))
    if overrides:
        cfg = merge(cfg, overrides, "command line")
    validate_sweep_grid(cfg)
    return cfg


def validate_sweep_grid(cfg: dict):
    for name, values in cfg["sweep"]["grid"].items():
        section, _, key = name.partition(".")
        if section not in DEFAULTS or key not in DEFAULTS[section] or section == "sweep":
            raise ConfigError(f"sweep.grid: unknown parameter {name!r}")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.grid.{name} must be a non-empty list")
        for v in values:
            _coerce(section, key, v, DEFAULTS[section][key])


def with_value(cfg: dict, name: str, value) -> dict:
    section, _, key = name.partition(".")
    out = copy.deepcopy(cfg)
    out[section][key] = _coerce(section, key, value, DEFAULTS[section][key])
    return out


def delta_k(cfg: dict) -> float:
    st = cfg["state"]
    if st["delta_k"] > 0:
        return st["delta_k"]
    if st["delta_x2"] <= 0:
        raise ConfigError("state needs a positive delta_k or delta_x2")
    return 1.0 / (2.0 * math.sqrt(st["delta_x2"]))
