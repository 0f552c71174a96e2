"""Deterministic JSON serialisation and the report schema."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, is_dataclass

import numpy as np

TOP_LEVEL_KEYS = ("config_echo", "contraction", "dimension", "smoothness", "stability", "empirical")


def jsonable(obj):
    """Plain JSON types; non-finite floats become the strings "inf", "-inf", "nan"."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(doc) -> str:
    # repr-based float output is the shortest round-trip-exact form
    return json.dumps(jsonable(doc), indent=2, allow_nan=False) + "\n"


_number = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}
_flag = {"type": "boolean"}

HYPOTHESIS_SCHEMA = {
    "type": "object",
    "required": ["uniform_nodes", "sign_condition", "triple", "H", "h", "all_hold"],
    "properties": {
        "uniform_nodes": _flag,
        "sign_condition": _flag,
        "triple": {"oneOf": [{"type": "null"}, {"type": "array", "items": {"type": "integer"},
                                                "minItems": 3, "maxItems": 3}]},
        "H": _number,
        "h": _number,
        "all_hold": _flag,
    },
}

DIMENSION_SCHEMA = {
    "type": "object",
    "required": ["lambda_low", "lambda_up", "bound_low", "bound_up", "case", "hypothesis", "empirical"],
    "properties": {
        "lambda_low": _number,
        "lambda_up": _number,
        "bound_low": _number,
        "bound_up": _number,
        "case": {"enum": ["a", "b", "inconclusive"]},
        "hypothesis": HYPOTHESIS_SCHEMA,
        "empirical": {"oneOf": [{"type": "null"}, {
            "type": "object",
            "required": ["records", "slope", "stderr"],
            "properties": {
                "records": {"type": "array", "items": {
                    "type": "object", "required": ["epsilon", "count"],
                    "properties": {"epsilon": {"type": "number"}, "count": {"type": "integer"}}}},
                "slope": _number,
                "stderr": _number,
            },
        }]},
    },
}

STABILITY_REPORT_SCHEMA = {
    "type": "object",
    "required": ["which", "max_dx", "max_dy", "max_dz", "omega", "omega_tilde", "bound",
                 "measured_sup_diff", "satisfied"],
    "properties": {
        "which": {"enum": ["x", "y", "z", "all"]},
        "bound": _number,
        "measured_sup_diff": _number,
        "satisfied": _flag,
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": list(TOP_LEVEL_KEYS),
    "additionalProperties": False,
    "properties": {
        "config_echo": {"type": "object"},
        "contraction": {"type": "object", "required": ["S", "contractive", "violations"]},
        "dimension": {"oneOf": [{"type": "null"}, DIMENSION_SCHEMA]},
        "smoothness": {"oneOf": [{"type": "null"}, {
            "type": "object",
            "required": ["hypothesis_holds"],
            "properties": {
                "hypothesis_holds": _flag,
                "constants": {"oneOf": [{"type": "null"}, {
                    "type": "object",
                    "required": ["M", "delta", "D", "case", "L1", "tau1", "L2", "tau2", "sup_f1", "sup_f2"],
                }]},
            },
        }]},
        "stability": {"oneOf": [{"type": "null"}, {
            "type": "object",
            "required": ["reports", "all_satisfied", "hypothesis_holds"],
            "properties": {
                "reports": {"type": "array", "items": STABILITY_REPORT_SCHEMA},
                "all_satisfied": _flag,
                "hypothesis_holds": _flag,
            },
        }]},
        "empirical": {"oneOf": [{"type": "null"}, {"type": "object"}]},
    },
}
