"""Run configuration: JSON file validated against a schema."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .voxel_io import SYNTH_MODELS

_MATERIAL = {
    "type": "object",
    "properties": {"E": {"type": "number", "exclusiveMinimum": 0},
                   "nu": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 0.5},
                   "rho": {"type": "number", "minimum": 0}},
    "required": ["E", "nu"],
    "additionalProperties": False,
}

_ORDER = {"type": "integer", "minimum": 1, "maximum": 3}

SCHEMA = {
    "type": "object",
    "properties": {
        "analysis": {"enum": ["mesh", "static", "modal", "patchtest"]},
        "model": {
            "type": "object",
            "properties": {
                "file": {"type": "string"},
                "synth": {"enum": list(SYNTH_MODELS)},
                "params": {"type": "object"},
                "cube": {
                    "type": "object",
                    "properties": {"width": {"type": "number", "exclusiveMinimum": 0},
                                   "h": {"type": "number", "exclusiveMinimum": 0},
                                   "split_corner": {"type": "boolean"}},
                    "required": ["h"],
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "octree": {
            "type": "object",
            "properties": {"threshold": {"type": "integer", "minimum": 0},
                           "min_size": {"type": "number", "exclusiveMinimum": 0},
                           "max_size": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "materials": {"type": "object", "patternProperties": {"^[0-9]+$": _MATERIAL},
                      "additionalProperties": False},
        "orders": {"oneOf": [_ORDER, {"type": "object",
                                      "patternProperties": {"^[0-9]+$": _ORDER},
                                      "additionalProperties": False}]},
        "bc": {
            "type": "object",
            "properties": {"fixed": {"type": "array", "minItems": 1, "items": {
                "type": "object",
                "properties": {"axis": {"enum": ["x", "y", "z"]},
                               "side": {"enum": ["min", "max"]},
                               "value": {"type": "array", "items": {"type": "number"},
                                         "minItems": 3, "maxItems": 3},
                               "components": {"type": "array", "items": {"enum": [0, 1, 2]},
                                              "minItems": 1, "uniqueItems": True}},
                "required": ["axis", "side"],
                "additionalProperties": False}}},
            "required": ["fixed"],
            "additionalProperties": False,
        },
        "load": {
            "type": "object",
            "properties": {"gravity": {"type": "array", "items": {"type": "number"},
                                       "minItems": 3, "maxItems": 3}},
            "additionalProperties": False,
        },
        "modes": {"type": "integer", "minimum": 1},
        "reference": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "patchtest": {
            "type": "object",
            "properties": {"case": {"enum": ["uniaxial", "bending", "cantilever"]},
                           "p": _ORDER,
                           "h": {"type": "array", "minItems": 1,
                                 "items": {"type": "number", "exclusiveMinimum": 0}},
                           "nu": {"type": "number"}},
            "required": ["case", "p"],
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {"error": {"type": "number", "minimum": 0},
                           "rate": {"type": "array", "items": {"type": "number"},
                                    "minItems": 2, "maxItems": 2},
                           "frequency": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
        "out": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
    },
    "required": ["analysis"],
    "additionalProperties": False,
    "allOf": [
        {"if": {"properties": {"analysis": {"const": "patchtest"}}},
         "then": {"required": ["patchtest"]}},
        {"if": {"properties": {"analysis": {"enum": ["mesh", "static", "modal"]}}},
         "then": {"required": ["model"]}},
        {"if": {"properties": {"analysis": {"const": "static"}}},
         "then": {"required": ["bc"]}},
    ],
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    analysis: str
    model: dict = field(default_factory=dict)
    octree: dict = field(default_factory=dict)
    materials: dict = field(default_factory=dict)
    orders: object = 1
    bc: dict = None
    load: dict = field(default_factory=dict)
    modes: int = 16
    reference: list = None
    patchtest: dict = None
    tolerances: dict = field(default_factory=dict)
    out: str = "results"
    threads: int = 1

    @classmethod
    def from_dict(cls, data):
        validate(data)
        return cls(**data)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def order_map(self):
        if isinstance(self.orders, dict):
            return {int(k): int(v) for k, v in self.orders.items()}
        return int(self.orders)


def validate(data):
    """Raise :class:`ConfigError` naming the offending path."""
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {e.message}")
    model = data.get("model", {})
    kinds = [k for k in ("file", "synth", "cube") if k in model]
    if data.get("analysis") != "patchtest" and len(kinds) != 1:
        raise ConfigError("config error at model: give exactly one of file, synth, cube")
