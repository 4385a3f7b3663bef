"""Scenario configuration documents.

A document has four sections::

    params:    preset name plus optional overrides (nu/2pi in GHz) and a
               drive given either as rabi_ratio (Omega / Gamma_par_enh) or
               a_in (sqrt(photons/ns))
    scenario:  kind and kind-specific settings
    numerics:  cutoff override, tolerances, seed
    output:    directory and formats

Documents are JSON or YAML and are validated before any computation.
Unknown keys are rejected.  Sidecar files written by the CLI contain the
resolved document plus a ``provenance`` section and can be fed back in.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .errors import ConfigError, InvalidParamsError
from .params import FREQUENCY_FIELDS, PRESETS, TWO_PI, SystemParams, preset

FIELD_KINDS = ["SL", "reflected", "transmitted", "filtered"]

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_FRACTION = {"type": "number", "minimum": 0, "maximum": 1}
_GRID = {
    "type": "object",
    "additionalProperties": False,
    "required": ["start", "stop", "num"],
    "properties": {
        "start": _NUM,
        "stop": _NUM,
        "num": {"type": "integer", "minimum": 1},
        "spacing": {"type": "string", "enum": ["linear", "log"]},
    },
}
_FIELD = {"type": "string", "enum": FIELD_KINDS}

PARAMS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"type": "string", "enum": sorted(PRESETS)},
        **{name: _NUM for name in FREQUENCY_FIELDS},
        "rabi_ratio": _NONNEG,
        "a_in": _NONNEG,
    },
    "not": {"required": ["rabi_ratio", "a_in"]},
}

SCENARIO_SCHEMAS = {
    "g2": {
        "field": _FIELD,
        "e_lo_ratio": _NUM,
        "t_f": _FRACTION,
        "tau_max": _POS,
        "n_tau": {"type": "integer", "minimum": 2},
        "irf_sigma_ps": _NONNEG,
    },
    "sweep": {
        "sweep": {"type": "string", "enum": ["lo", "detuning", "power", "filter"]},
        "field": _FIELD,
        "e_lo_ratio": _NUM,
        "t_f": _FRACTION,
        "grid": _GRID,
    },
    "spectrum": {
        "field": _FIELD,
        "e_lo_ratio": _NUM,
        "t_f": _FRACTION,
        "dt": _POS,
        "omega_max_ghz": _POS,
        "compare_closed_form": {"type": "boolean"},
    },
    "hom": {
        "field": _FIELD,
        "e_lo_ratio": _NUM,
        "t_f": _FRACTION,
        "delta_t_ns": _NONNEG,
        "V0": _FRACTION,
        "R_A": _FRACTION,
        "R_B": _FRACTION,
        "tau_max": _POS,
        "n_tau": {"type": "integer", "minimum": 2},
        "tau_window": _POS,
    },
    "traj": {
        "n_traj": {"type": "integer", "minimum": 1},
        "t_end": _POS,
        "dt_max": _POS,
        "burn_in": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
    },
}

SCENARIO_REQUIRED = {"sweep": ["sweep", "grid"]}

DOCUMENT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["params", "scenario"],
    "properties": {
        "params": PARAMS_SCHEMA,
        "scenario": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"type": "string", "enum": sorted(SCENARIO_SCHEMAS)}},
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": {"type": ["integer", "null"], "minimum": 1},
                "tail_tol": _POS,
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directory": {"type": "string"},
                "formats": {
                    "type": "array",
                    "items": {"type": "string", "enum": ["csv", "svg"]},
                    "minItems": 1,
                },
            },
        },
        "provenance": {"type": "object"},
    },
}

DEFAULTS = {
    "numerics": {"n_max": None, "tail_tol": 1e-10, "seed": 0},
    "output": {"directory": "out", "formats": ["csv"]},
}

SCENARIO_DEFAULTS = {
    "g2": {"field": "reflected", "tau_max": 1.0, "n_tau": 1001},
    "sweep": {"field": "reflected"},
    "spectrum": {"field": "transmitted", "dt": 0.002, "compare_closed_form": False},
    "hom": {"field": "reflected", "delta_t_ns": 2.0, "V0": 1.0, "R_A": 0.5, "R_B": 0.5,
            "tau_max": 3.0, "n_tau": 3001, "tau_window": 4.0},
    "traj": {"n_traj": 1000, "t_end": 10.0, "dt_max": 0.01, "burn_in": 0.1},
}


def _raise_first(validator, instance, where: str):
    errors = sorted(validator.iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(x) for x in [where, *err.absolute_path] if x != "")
        raise ConfigError(f"{path or '<root>'}: {err.message}")


def validate(doc: dict) -> dict:
    """Validate a raw document and return it with defaults filled in.

    Raises
    ------
    ConfigError
        With the path of the first offending entry.
    """
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    _raise_first(jsonschema.Draft202012Validator(DOCUMENT_SCHEMA), doc, "")
    kind = doc["scenario"]["kind"]
    scenario_schema = {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", *SCENARIO_REQUIRED.get(kind, [])],
        "properties": {"kind": {"const": kind}, **SCENARIO_SCHEMAS[kind]},
    }
    _raise_first(jsonschema.Draft202012Validator(scenario_schema), doc["scenario"], "scenario")
    out = copy.deepcopy(doc)
    out["scenario"] = {**SCENARIO_DEFAULTS[kind], **out["scenario"]}
    for section, defaults in DEFAULTS.items():
        out[section] = {**defaults, **out.get(section, {})}
    scen = out["scenario"]
    if scen.get("field") == "SL" and "e_lo_ratio" not in scen:
        raise ConfigError("scenario: field SL needs e_lo_ratio")
    if scen.get("field") == "filtered" and "t_f" not in scen:
        raise ConfigError("scenario: field filtered needs t_f")
    if "preset" not in out["params"]:
        missing = [f for f in ("g", "kappa1", "kappa2", "kappa_s", "gamma_par")
                   if f not in out["params"]]
        if missing:
            raise ConfigError(f"params: without a preset these keys are required: {missing}")
    build_params(out)
    return out


def grid_values(grid: dict):
    """Sample points of a ``{start, stop, num, spacing}`` grid."""
    if grid.get("spacing", "linear") == "log":
        if grid["start"] <= 0 or grid["stop"] <= 0:
            raise ConfigError("log-spaced grid needs positive start and stop")
        return np.geomspace(grid["start"], grid["stop"], grid["num"])
    return np.linspace(grid["start"], grid["stop"], grid["num"])


def read(path: str | Path) -> dict:
    """Parse a JSON or YAML configuration file without validating it."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return doc


def load(path: str | Path) -> dict:
    """Read and validate a JSON or YAML configuration file."""
    return validate(read(path))


def build_params(doc: dict) -> SystemParams:
    """System parameters described by the ``params`` section."""
    section = doc["params"]
    overrides = {k: TWO_PI * v for k, v in section.items() if k in FREQUENCY_FIELDS}
    try:
        if "preset" in section:
            p = preset(section["preset"]).replace(**overrides)
        else:
            p = SystemParams(**overrides)
        if "a_in" in section:
            p = p.replace(a_in=section["a_in"])
        if "rabi_ratio" in section:
            p = p.with_rabi_ratio(section["rabi_ratio"])
    except InvalidParamsError as exc:
        raise ConfigError(f"params: {exc}") from None
    return p
