"""JSON run configurations: schema validation, explicit defaults and object builders."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .energy import EnergyDensity, isotropic, weighted
from .expr import Expression
from .geometry import Crack, Domain

SUBCOMMANDS = ("solve", "conjugate", "capacity", "stability", "evolve", "selftest")


class ConfigError(ValueError):
    """Configuration does not match the schema or cannot be interpreted."""


_point = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_polyline = {"type": "array", "items": _point, "minItems": 1}
_crack = {
    "type": "object",
    "properties": {"polylines": {"type": "array", "items": _polyline}},
    "required": ["polylines"],
    "additionalProperties": False,
}
_tags = {"type": "string", "pattern": "^[DN]+$"}
_hole = {
    "type": "object",
    "properties": {"vertices": {"type": "array", "items": _point, "minItems": 3}, "tags": _tags},
    "required": ["vertices", "tags"],
    "additionalProperties": False,
}
_domain = {
    "type": "object",
    "properties": {
        "rectangle": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
        "vertices": {"type": "array", "items": _point, "minItems": 3},
        "disk": {
            "type": "object",
            "properties": {"radius": {"type": "number", "exclusiveMinimum": 0},
                           "center": _point, "sides": {"type": "integer", "minimum": 8}},
            "additionalProperties": False,
        },
        "tags": _tags,
        "holes": {"type": "array", "items": _hole},
    },
    "oneOf": [{"required": ["rectangle"]}, {"required": ["vertices", "tags"]}, {"required": ["disk"]}],
    "additionalProperties": False,
}
_density = {
    "type": "object",
    "properties": {
        "family": {"enum": ["isotropic", "weighted"]},
        "p": {"type": "number", "exclusiveMinimum": 1},
        "coefficient": {"type": ["string", "number"]},
        "a_min": {"type": "number", "exclusiveMinimum": 0},
        "a_max": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["family", "p"],
    "additionalProperties": False,
}
_expr = {"type": ["string", "number"]}
_res = {"type": "integer", "minimum": 1, "maximum": 4096}
_tol = {"type": "number", "exclusiveMinimum": 0}
_common = {"seed": {"type": "integer"}, "threads": {"type": "integer", "minimum": 1},
           "subcommand": {"enum": list(SUBCOMMANDS)}}

SCHEMAS: dict[str, dict] = {
    "solve": {
        "type": "object",
        "properties": {**_common, "domain": _domain, "crack": _crack, "density": _density,
                       "datum": _expr, "n": _res, "tol": _tol,
                       "max_iter": {"type": "integer", "minimum": 1}},
        "required": ["domain", "density", "datum", "n"],
        "additionalProperties": False,
    },
    "capacity": {
        "type": "object",
        "properties": {
            **_common,
            "set": {"type": "object",
                    "properties": {"points": {"type": "array", "items": _point}, "crack": _crack,
                                   "disks": {"type": "array", "items": {
                                       "type": "object",
                                       "properties": {"center": _point,
                                                      "radius": {"type": "number", "minimum": 0}},
                                       "required": ["center", "radius"], "additionalProperties": False}}},
                    "additionalProperties": False},
            "container": _domain,
            "r": {"type": "number", "exclusiveMinimum": 1},
            "n": _res,
            "tol": _tol,
        },
        "required": ["set", "r", "n"],
        "additionalProperties": False,
    },
    "stability": {
        "type": "object",
        "properties": {
            **_common,
            "domain": _domain,
            "density": _density,
            "datum": _expr,
            "sequence": {
                "type": "object",
                "properties": {
                    "kind": {"enum": ["constant", "grow_to_limit", "merge_gap", "translate", "boundary_touch"]},
                    "limit": _crack,
                    "hs": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                    "n": _res,
                    "n_per_index": {"type": "integer", "minimum": 1},
                    "at": {"type": "number"},
                    "direction": _point,
                    "end": {"enum": ["first", "last"]},
                    "lam": {"type": "number", "exclusiveMinimum": 0},
                    "m": {"type": "integer", "minimum": 1},
                },
                "required": ["kind", "limit", "hs"],
                "additionalProperties": False,
            },
            "join": {"type": "object",
                     "properties": {"delta_factor": {"type": "number", "exclusiveMinimum": 0},
                                    "with_neumann": {"type": "boolean"}},
                     "additionalProperties": False},
            "reference_n": _res,
            "exponent": {"type": "number", "exclusiveMinimum": 1},
        },
        "required": ["domain", "density", "datum", "sequence"],
        "additionalProperties": False,
    },
    "evolve": {
        "type": "object",
        "properties": {
            **_common,
            "domain": _domain,
            "density": _density,
            "load": {"type": "object",
                     "properties": {"datum": _expr,
                                    "times": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                                    "ramp": {"type": "array", "items": {"type": "number"},
                                             "minItems": 3, "maxItems": 3}},
                     "required": ["datum"],
                     "oneOf": [{"required": ["times"]}, {"required": ["ramp"]}],
                     "additionalProperties": False},
            "dictionary": {"type": "array", "items": _crack, "minItems": 1},
            "initial_crack": _crack,
            "n": _res,
            "tol": _tol,
        },
        "required": ["domain", "density", "load", "dictionary", "n"],
        "additionalProperties": False,
    },
}
SCHEMAS["conjugate"] = copy.deepcopy(SCHEMAS["solve"])
SCHEMAS["conjugate"]["properties"]["rectangles"] = {
    "type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}}
SCHEMAS["conjugate"]["properties"]["tol"] = _tol
SCHEMAS["conjugate"]["properties"]["verify_tol"] = _tol
SCHEMAS["selftest"] = {"type": "object", "properties": {**_common, "only": {
    "type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 10}}},
    "additionalProperties": False}

DEFAULTS: dict[str, dict] = {
    "solve": {"crack": {"polylines": []}, "tol": 1e-9, "max_iter": 200, "seed": 0},
    "conjugate": {"crack": {"polylines": []}, "tol": 1e-9, "max_iter": 200, "seed": 0,
                  "rectangles": [], "verify_tol": 1e-6},
    "capacity": {"container": {"disk": {"radius": 1.0, "center": [0.0, 0.0], "sides": 256}},
                 "tol": 1e-9, "seed": 0},
    "stability": {"reference_n": 256, "seed": 0},
    "evolve": {"initial_crack": {"polylines": []}, "tol": 1e-8, "seed": 0},
    "selftest": {"seed": 0},
}


def load_config(path) -> dict:
    """Read a JSON config, or the ``config`` block of an emitted manifest."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    if isinstance(data, dict) and "config" in data and "manifest_version" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def resolve(sub: str, cfg: dict) -> dict:
    """Validate ``cfg`` for subcommand ``sub`` and return it with explicit defaults."""
    if sub not in SCHEMAS:
        raise ConfigError(f"unknown subcommand {sub!r}")
    cfg = dict(cfg)
    if cfg.get("subcommand", sub) != sub:
        raise ConfigError(f"config is for {cfg['subcommand']!r}, not {sub!r}")
    cfg.pop("subcommand", None)
    try:
        jsonschema.validate(cfg, SCHEMAS[sub])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    out = copy.deepcopy(DEFAULTS.get(sub, {}))
    out.update(copy.deepcopy(cfg))
    if sub == "stability":
        seq = out["sequence"]
        if ("n" in seq) == ("n_per_index" in seq):
            raise ConfigError("sequence: give exactly one of n or n_per_index")
    if "density" in out:
        d = out["density"]
        if d["family"] == "weighted":
            for k in ("coefficient", "a_min", "a_max"):
                if k not in d:
                    raise ConfigError(f"density: weighted family needs {k!r}")
    out["subcommand"] = sub
    return out


def build_domain(spec: dict) -> Domain:
    return Domain.from_dict(spec)


def build_crack(spec: dict | None) -> Crack:
    return Crack.from_dict(spec or {"polylines": []})


def build_density(spec: dict) -> EnergyDensity:
    if spec["family"] == "isotropic":
        return isotropic(spec["p"])
    coef = Expression(spec["coefficient"])
    return weighted(spec["p"], lambda x: coef(x), spec["a_min"], spec["a_max"], spec=dict(spec))
