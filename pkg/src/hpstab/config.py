"""Run configuration: JSON schema, loading and validation."""

from __future__ import annotations

import copy
import hashlib
import json

import jsonschema

SCHEMA_VERSION = 1
COMMANDS = ("metrics", "cusp", "eig", "poisson", "sweep", "audit")

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}


def _shape_kind(kind: str, props: dict, required: list) -> dict:
    return {
        "type": "object",
        "properties": {"kind": {"const": kind}, **props},
        "required": ["kind", *required],
        "additionalProperties": False,
    }


SHAPE_SCHEMA = {
    "oneOf": [
        _shape_kind("disk", {"center": _POINT, "radius": _POS}, ["center", "radius"]),
        _shape_kind("rectangle", {"min": _POINT, "max": _POINT}, ["min", "max"]),
        _shape_kind("polygon", {"vertices": {"type": "array", "items": _POINT, "minItems": 3}},
                    ["vertices"]),
        _shape_kind("graph", {"t": {"type": "array", "items": _NUM, "minItems": 2},
                              "g": {"type": "array", "items": _NUM, "minItems": 2},
                              "side": {"enum": ["below", "above"]}, "floor": _NUM,
                              "xmin": _NUM, "xmax": _NUM}, ["t", "g"]),
        _shape_kind("union", {"parts": {"type": "array", "items": {"$ref": "#/$defs/shape"},
                                        "minItems": 1}}, ["parts"]),
        _shape_kind("intersection", {"parts": {"type": "array", "items": {"$ref": "#/$defs/shape"},
                                               "minItems": 1}}, ["parts"]),
        _shape_kind("difference", {"a": {"$ref": "#/$defs/shape"}, "b": {"$ref": "#/$defs/shape"}},
                    ["a", "b"]),
        _shape_kind("offset", {"base": {"$ref": "#/$defs/shape"}, "delta": _NUM},
                    ["base", "delta"]),
        _shape_kind("translate", {"base": {"$ref": "#/$defs/shape"}, "by": _POINT},
                    ["base", "by"]),
    ]
}

MODULUS_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["zero", "lipschitz", "hoelder", "tabulated"]},
        "L": {"type": "number", "minimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "offset": {"type": "number", "minimum": 0},
        "r": {"type": "array", "items": _NUM},
        "values": {"type": "array", "items": _NUM},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

COEFFICIENT_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["identity", "diagonal", "constant"]},
        "a11": _POS, "a22": _POS,
        "matrix": {"type": "array", "items": _POINT, "minItems": 2, "maxItems": 2},
        "alpha": _POS,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

FORCING_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["constant", "sines"]},
        "value": _NUM,
        "terms": {"type": "array", "items": {
            "type": "object",
            "properties": {"amplitude": _NUM, "kx": _NUM, "ky": _NUM, "phase": _NUM},
            "required": ["amplitude", "kx", "ky"],
            "additionalProperties": False,
        }},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

FAMILY_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["erode", "dilate", "translate", "bump"]},
        "schedule": {"type": "array", "items": _POS, "minItems": 1},
        "direction": _POINT,
        "center": _NUM, "width": _POS,
        "profile": {"enum": ["lipschitz", "hoelder"]},
        "exponent": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "inward": {"type": "boolean"},
    },
    "required": ["kind", "schedule"],
    "additionalProperties": False,
}

PARAMS_SCHEMA = {
    "type": "object",
    "properties": {
        "k": {"type": "integer", "minimum": 1},
        "r": _POS,
        "directions": {"type": "integer", "minimum": 1},
        "condition": {"enum": ["W1", "W2"]},
        "forcing": FORCING_SCHEMA,
        "sweep": {"enum": ["eigen", "resolvent", "angle"]},
        "family": FAMILY_SCHEMA,
        "n_max": {"type": "integer", "minimum": 1},
        "radius": _POS,
        "cusp_r": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "suite": {"enum": ["savare", "birkhoff", "dilated_cusp", "ball_in_cone",
                           "shifted_exterior", "co_gap_bound", "w1w2", "metric"]},
        "count": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "dense_limit": {"type": "integer", "minimum": 1},
        "quadrature": {"enum": ["gauss", "midpoint"]},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "hpstab run configuration",
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "grid": {
            "type": "object",
            "properties": {"origin": _POINT, "side": _POS,
                           "resolution": {"type": "integer", "minimum": 2}},
            "required": ["side", "resolution"],
            "additionalProperties": False,
        },
        "domain": {"$ref": "#/$defs/shape"},
        "domain2": {"$ref": "#/$defs/shape"},
        "modulus": MODULUS_SCHEMA,
        "coefficient": COEFFICIENT_SCHEMA,
        "params": PARAMS_SCHEMA,
        "seed": {"type": "integer", "minimum": 0},
        "resolution_check": {"type": "boolean"},
        "output": {"type": "string"},
    },
    "required": ["command", "grid"],
    "additionalProperties": False,
    "$defs": {"shape": SHAPE_SCHEMA},
}


class ConfigError(Exception):
    """Configuration failed to parse or validate; ``diagnostics`` lists the problems."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


def _location(err: jsonschema.ValidationError) -> str:
    path = "/".join(str(p) for p in err.absolute_path)
    return f"field '{path or '<root>'}'"


def validate_config(cfg) -> dict:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError([f"{_location(e)}: {e.message}" for e in errors])
    out = copy.deepcopy(cfg)
    out.setdefault("seed", 0)
    out.setdefault("params", {})
    out.setdefault("resolution_check", False)
    return out


def parse_config(text: str) -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc
    return validate_config(cfg)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
    return parse_config(text)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()
