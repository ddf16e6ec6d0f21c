"""Scenario configuration: strict JSON schema, loading and element resolution."""

from __future__ import annotations

import json
import math
from importlib import resources
from typing import List

import numpy as np
from jsonschema import Draft202012Validator

from .circuit import ElementParams
from .errors import ValidationError

SCENARIOS = (
    "ftf-sweep",
    "nnn-sweep",
    "cqcq-zz",
    "analytic-vs-numeric",
    "squares-sweep",
    "spectator-error",
    "leakage-map",
    "parasitic-drive",
    "czz-margin",
)

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

_DEFS = {
    "grid": {
        "oneOf": [
            {"type": "array", "items": _NUM, "minItems": 1},
            {
                "type": "object",
                "additionalProperties": False,
                "required": ["start", "stop", "num"],
                "properties": {
                    "start": _NUM,
                    "stop": _NUM,
                    "num": {"type": "integer", "minimum": 1},
                    "spacing": {"enum": ["linear", "log"]},
                },
            },
        ]
    },
    "element": {
        "oneOf": [
            {"type": "string", "minLength": 1},
            {
                "type": "object",
                "additionalProperties": False,
                "required": ["ref"],
                "properties": {
                    "ref": {"type": "string"},
                    "type": {"enum": ["C0", "C1"]},
                    "basis_dim": {"type": "integer", "minimum": 2},
                    "keep_levels": {"type": "integer", "minimum": 2},
                },
            },
            {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind", "ec_ghz"],
                "properties": {
                    "kind": {"enum": ["fluxonium", "transmon", "oscillator"]},
                    "type": {"enum": ["C0", "C1"]},
                    "ec_ghz": _POS,
                    "ej_ghz": {"type": "number", "minimum": 0},
                    "el_ghz": {"type": "number", "minimum": 0},
                    "phi_ext_rad": _NUM,
                    "basis_dim": {"type": "integer", "minimum": 2},
                    "keep_levels": {"type": "integer", "minimum": 2},
                },
            },
        ]
    },
    "oscillator": {
        "type": "object",
        "additionalProperties": False,
        "required": ["element", "g_o_ghz"],
        "properties": {"element": {"$ref": "#/$defs/element"}, "g_o_ghz": _NUM},
    },
    "sign": {"enum": [1, -1]},
}


def _params(props, required=()):
    return {"type": "object", "additionalProperties": False, "required": list(required), "properties": props}


EL = {"$ref": "#/$defs/element"}
GRID = {"$ref": "#/$defs/grid"}

_CQCQ = {
    "c_alpha": EL,
    "q1": EL,
    "c_beta": EL,
    "q2": EL,
    "g1_ghz": _NUM,
    "g2_ghz": _NUM,
    "g3_ghz": _NUM,
    "g_ff_ghz": _NUM,
    "connection_sign": {"$ref": "#/$defs/sign"},
    "oscillator": {"$ref": "#/$defs/oscillator"},
}

PARAMETER_SCHEMAS = {
    "ftf-sweep": _params(
        {"qubit": EL, "coupler": EL, "g_qc_ghz": _NUM, "g_ff_ghz": GRID, "df_qq_ghz": GRID},
        ["g_ff_ghz", "df_qq_ghz"],
    ),
    "nnn-sweep": _params(
        {
            "couplers": {"type": "array", "items": EL, "minItems": 2, "maxItems": 2},
            "qubit": EL,
            "middle_qubit": EL,
            "df_qq_ghz": GRID,
        },
        ["couplers", "df_qq_ghz"],
    ),
    "cqcq-zz": _params(dict(_CQCQ, g_ghz=_NUM, dcc_ghz=GRID), ["g_ghz", "dcc_ghz"]),
    "analytic-vs-numeric": _params(dict(_CQCQ, g_ghz=GRID), ["g_ghz"]),
    "squares-sweep": _params(
        {
            "edge_coupler": EL,
            "middle_coupler": EL,
            "q1": EL,
            "q2": EL,
            "g_cc_ghz": _NUM,
            "g_adjacent_ghz": _NUM,
            "dcc_ghz": GRID,
            "oscillator": {"$ref": "#/$defs/oscillator"},
            "extra_couplings": {
                "type": "array",
                "items": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["a", "b", "g_ghz"],
                    "properties": {
                        "a": {"type": "integer", "minimum": 0, "maximum": 5},
                        "b": {"type": "integer", "minimum": 0, "maximum": 5},
                        "g_ghz": _NUM,
                    },
                },
            },
        },
        ["dcc_ghz"],
    ),
    "spectator-error": _params(
        {"gap_ghz": _POS, "zeta_cs_ghz": GRID, "tau_ns": GRID}, ["zeta_cs_ghz", "tau_ns"]
    ),
    "leakage-map": _params(
        {
            "gap_ghz": _POS,
            "k": GRID,
            "delta_ghz": GRID,
            "tau_ns": _POS,
            "sources": {"type": "array", "items": {"type": "string", "pattern": "^[01]{3}$"}, "minItems": 1},
        },
        ["k", "delta_ghz"],
    ),
    "parasitic-drive": _params(
        {"d": GRID, "theta_rad": _NUM, "tau_ns": _POS}, ["d"]
    ),
    "czz-margin": _params({"qubit": EL, "c1u": EL, "c0l": EL, "c0l_f01_ghz": GRID}),
}


def schema() -> dict:
    branches = [
        {
            "if": {"properties": {"scenario": {"const": name}}, "required": ["scenario"]},
            "then": {"properties": {"parameters": PARAMETER_SCHEMAS[name]}},
        }
        for name in SCENARIOS
    ]
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "fluxlat scenario configuration",
        "type": "object",
        "additionalProperties": False,
        "required": ["scenario", "parameters"],
        "properties": {
            "scenario": {"enum": list(SCENARIOS)},
            "parameters": {"type": "object"},
            "output": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
            "format": {"enum": ["csv", "json"]},
            "plot": {"type": "boolean"},
        },
        "allOf": branches,
        "$defs": _DEFS,
    }


class ConfigError(ValidationError):
    """Schema or semantic violations; ``problems`` lists every one found."""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _path(err) -> str:
    return "/" + "/".join(str(p) for p in err.absolute_path)


def _branch_errors(err):
    """Errors of the oneOf branch the instance was evidently meant for.

    Branches whose root type does not match are skipped; among the rest the
    one with the fewest errors wins. Falls back to ``err`` itself.
    """
    if not err.context:
        return [err]
    branches = {}
    for sub in err.context:
        branches.setdefault(sub.relative_schema_path[0], []).append(sub)
    candidates = [
        subs for subs in branches.values()
        if not any(len(e.relative_schema_path) == 2 and e.relative_schema_path[1] == "type" for e in subs)
    ]
    if not candidates:
        return [err]
    return min(candidates, key=len)


def validate_config(raw) -> List[str]:
    validator = Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    problems = []
    for err in errors:
        problems.extend(f"{_path(leaf)}: {leaf.message}" for leaf in _branch_errors(err))
    if not problems:
        problems.extend(_semantic_problems(raw))
    return problems


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"])
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"])
    problems = validate_config(raw)
    if problems:
        raise ConfigError(problems)
    raw.setdefault("output", raw["scenario"])
    raw.setdefault("format", "csv")
    raw.setdefault("plot", False)
    return raw


def representative() -> dict:
    text = resources.files("fluxlat").joinpath("data/representative.json").read_text()
    return json.loads(text)


def grid(spec) -> np.ndarray:
    if isinstance(spec, list):
        return np.array(spec, dtype=float)
    num = spec["num"]
    if spec.get("spacing", "linear") == "log":
        if spec["start"] <= 0 or spec["stop"] <= 0:
            raise ValidationError("log grid needs positive start and stop")
        return np.logspace(math.log10(spec["start"]), math.log10(spec["stop"]), num)
    return np.linspace(spec["start"], spec["stop"], num)


_KIND_FIELDS = {"ec_ghz": "EC", "ej_ghz": "EJ", "el_ghz": "EL", "phi_ext_rad": "phi_ext",
                "basis_dim": "basis_dim", "keep_levels": "keep_levels"}


def element_params(spec, table=None) -> ElementParams:
    """ElementParams from a name, a {ref, overrides} object or an inline definition."""
    table = table if table is not None else representative()["elements"]
    if isinstance(spec, str):
        spec = {"ref": spec}
    if "ref" in spec:
        if spec["ref"] not in table:
            raise ValidationError(f"unknown element {spec['ref']!r}; known: {sorted(table)}")
        base = dict(table[spec["ref"]])
        base.update({k: v for k, v in spec.items() if k not in ("ref", "type")})
        spec = base
    kw = {_KIND_FIELDS[k]: v for k, v in spec.items() if k in _KIND_FIELDS}
    return ElementParams(spec["kind"], **kw)


def coupler_type(spec) -> str:
    """'C0' or 'C1' from an explicit ``type`` or the reference name prefix."""
    if isinstance(spec, dict) and "type" in spec:
        return spec["type"]
    ref = spec if isinstance(spec, str) else spec.get("ref", "")
    if ref[:2] in ("C0", "C1"):
        return ref[:2]
    raise ValidationError(f"cannot infer coupler type of {spec!r}; add \"type\": \"C0\" or \"C1\"")


ELEMENT_KEYS = ("qubit", "coupler", "c_alpha", "q1", "c_beta", "q2", "middle_qubit",
                "edge_coupler", "middle_coupler", "c1u", "c0l")


def _semantic_problems(raw) -> List[str]:
    problems = []
    params = raw.get("parameters", {})
    table = representative()["elements"]

    def check(spec, path, typed=False):
        try:
            element_params(spec, table)
            if typed:
                coupler_type(spec)
        except ValidationError as exc:
            problems.append(f"{path}: {exc}")

    for key, value in params.items():
        path = f"/parameters/{key}"
        if key in ELEMENT_KEYS:
            check(value, path, typed=key in ("c_alpha", "c_beta", "edge_coupler", "middle_coupler"))
        elif key == "couplers":
            for i, v in enumerate(value):
                check(v, f"{path}/{i}", typed=True)
        elif key == "oscillator":
            check(value["element"], f"{path}/element")
        elif isinstance(value, dict) and value.get("spacing") == "log":
            if value["start"] <= 0 or value["stop"] <= 0:
                problems.append(f"{path}: log grid needs positive start and stop")
    return problems
