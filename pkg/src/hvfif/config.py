"""JSON run configuration: loading and validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from . import factors as fx
from .core import FactorQuad

QUAD_KEYS = FactorQuad.NAMES
COMMANDS = ("generate", "analyze", "stability", "surface")
KINDS = ("x", "y", "z", "all")


class ConfigError(ValueError):
    """Invalid configuration; ``where`` is the dotted location inside the file."""

    def __init__(self, source: str, where: str, message: str):
        loc = f"{source}: {where}" if where else source
        super().__init__(f"{loc}: {message}")
        self.source = source
        self.where = where


@dataclass
class EvaluatorConfig:
    method: str = "subdivision"
    depth: int = 8
    grid_size: int = 4097
    tol: float = 1e-10
    max_iters: int = 10000


@dataclass
class StabilityConfig:
    kinds: tuple = ("y", "z", "all")
    trials: int = 20
    magnitude: float = 0.1
    x_magnitude: Optional[float] = None


@dataclass
class AnalysisConfig:
    scales: tuple = (1, 2, 3, 4, 5, 6)
    sample_depth: int = 8
    seed: int = 0
    stability: StabilityConfig = field(default_factory=StabilityConfig)


@dataclass
class OutputConfig:
    dir: str = "out"
    prefix: str = "hvfif"
    graymap: bool = False
    bits: int = 8


@dataclass
class RunConfig:
    mode: str
    data: dict
    factors: list
    orientation: Optional[list]
    validation: str
    evaluator: EvaluatorConfig
    analysis: AnalysisConfig
    output: OutputConfig
    raw: dict
    source: str = "<config>"


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def fail(self, where: str, message: str):
        raise ConfigError(self.source, where, message)

    def require(self, obj: dict, key: str, where: str):
        if not isinstance(obj, dict):
            self.fail(where, "expected an object")
        if key not in obj or obj[key] in (None, [], {}):
            self.fail(where, f"missing key '{key}'")
        return obj[key]

    def number_list(self, value, where: str) -> list:
        if not isinstance(value, list) or not value:
            self.fail(where, "expected a non-empty list of numbers")
        for k, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                self.fail(f"{where}[{k}]", f"expected a number, got {type(v).__name__}")
        return [float(v) for v in value]

    def matrix(self, value, where: str) -> list:
        if not isinstance(value, list) or not value:
            self.fail(where, "expected a list of rows")
        return [self.number_list(row, f"{where}[{k}]") for k, row in enumerate(value)]

    def typed(self, obj: dict, key: str, kind, default, where: str):
        if key not in obj:
            return default
        v = obj[key]
        ok = isinstance(v, kind) and not (isinstance(v, bool) and kind is not bool)
        if kind is float:
            ok = isinstance(v, (int, float)) and not isinstance(v, bool)
        if not ok:
            name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
            self.fail(f"{where}.{key}" if where else key, f"expected {name}, got {type(v).__name__}")
        return float(v) if kind is float else v

    def expression(self, value, where: str):
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            self.fail(where, f"expected an expression string or number, got {type(value).__name__}")
        try:
            return fx.as_expr(value)
        except fx.FactorSyntaxError as exc:
            self.fail(where, str(exc))

    def quad(self, value, where: str) -> FactorQuad:
        if isinstance(value, dict):
            unknown = sorted(set(value) - set(QUAD_KEYS))
            if unknown:
                self.fail(where, f"unknown factor key '{unknown[0]}'")
            parts = [self.expression(self.require(value, k, where), f"{where}.{k}") for k in QUAD_KEYS]
        elif isinstance(value, list):
            if len(value) != 4:
                self.fail(where, f"expected 4 factors, found {len(value)}")
            parts = [self.expression(v, f"{where}[{k}]") for k, v in enumerate(value)]
        else:
            self.fail(where, "expected an object or a list of four expressions")
        return FactorQuad(*parts)


def parse_config(raw: Any, source: str = "<config>") -> RunConfig:
    """Validate a decoded JSON document and parse every factor expression."""
    r = _Reader(source)
    if not isinstance(raw, dict):
        r.fail("", "top level must be an object")
    mode = r.typed(raw, "mode", str, "curve", "")
    if mode not in ("curve", "surface"):
        r.fail("mode", f"expected 'curve' or 'surface', got {mode!r}")
    data_raw = r.require(raw, "data", "")
    if not isinstance(data_raw, dict):
        r.fail("data", "expected an object")
    data = {}
    if mode == "curve":
        for key in ("x", "y", "z"):
            data[key] = r.number_list(r.require(data_raw, key, "data"), f"data.{key}")
        if not len(data["x"]) == len(data["y"]) == len(data["z"]):
            r.fail("data", "x, y and z must have equal lengths")
        expected = len(data["x"]) - 1
    else:
        for key in ("x", "y"):
            data[key] = r.number_list(r.require(data_raw, key, "data"), f"data.{key}")
        for key in ("z", "t"):
            data[key] = r.matrix(r.require(data_raw, key, "data"), f"data.{key}")
            shape = (len(data["x"]), len(data["y"]))
            if len(data[key]) != shape[0] or any(len(row) != shape[1] for row in data[key]):
                r.fail(f"data.{key}", f"expected a {shape[0]}x{shape[1]} matrix")
        expected = (len(data["x"]) - 1) * (len(data["y"]) - 1)

    if "factors" not in raw or raw["factors"] in (None, [], {}):
        r.fail("", "missing key 'factors'")
    fraw = raw["factors"]
    if not isinstance(fraw, list):
        r.fail("factors", "expected a list of factor quadruples")
    if len(fraw) != expected:
        r.fail("factors", f"expected {expected} factor quadruples, found {len(fraw)}")
    quads = [r.quad(v, f"factors[{k}]") for k, v in enumerate(fraw)]

    orientation = raw.get("orientation")
    if orientation is not None:
        if mode != "curve" or not isinstance(orientation, list) or len(orientation) != expected:
            r.fail("orientation", f"expected a list of {expected} entries")
        for k, o in enumerate(orientation):
            if o not in ("forward", "reversed"):
                r.fail(f"orientation[{k}]", f"expected 'forward' or 'reversed', got {o!r}")
    validation = r.typed(raw, "validation", str, "strict", "")
    if validation not in ("strict", "report"):
        r.fail("validation", f"expected 'strict' or 'report', got {validation!r}")

    ev_raw = raw.get("evaluator", {})
    if not isinstance(ev_raw, dict):
        r.fail("evaluator", "expected an object")
    ev = EvaluatorConfig(
        method=r.typed(ev_raw, "method", str, "subdivision", "evaluator"),
        depth=r.typed(ev_raw, "depth", int, 8 if mode == "curve" else 4, "evaluator"),
        grid_size=r.typed(ev_raw, "grid_size", int, 4097, "evaluator"),
        tol=r.typed(ev_raw, "tol", float, 1e-10, "evaluator"),
        max_iters=r.typed(ev_raw, "max_iters", int, 10000, "evaluator"),
    )
    if ev.method not in ("subdivision", "rb_iterate"):
        r.fail("evaluator.method", f"expected 'subdivision' or 'rb_iterate', got {ev.method!r}")
    if ev.depth < 0:
        r.fail("evaluator.depth", "must be non-negative")

    an_raw = raw.get("analysis", {})
    if not isinstance(an_raw, dict):
        r.fail("analysis", "expected an object")
    scales = an_raw.get("scales", [1, 2, 3, 4, 5, 6] if mode == "curve" else [1, 2, 3, 4])
    if not isinstance(scales, list) or not all(isinstance(k, int) and not isinstance(k, bool) and k >= 1
                                               for k in scales):
        r.fail("analysis.scales", "expected a list of positive integers")
    seed = r.typed(an_raw, "seed", int, 0, "analysis")
    st_raw = an_raw.get("stability", {})
    if not isinstance(st_raw, dict):
        r.fail("analysis.stability", "expected an object")
    kinds = st_raw.get("kinds", ["y", "z", "all"])
    if not isinstance(kinds, list) or not all(k in KINDS for k in kinds):
        r.fail("analysis.stability.kinds", f"expected a list drawn from {list(KINDS)}")
    x_mag = st_raw.get("x_magnitude")
    if x_mag is not None and (isinstance(x_mag, bool) or not isinstance(x_mag, (int, float))):
        r.fail("analysis.stability.x_magnitude", "expected a number")
    stab = StabilityConfig(
        kinds=tuple(kinds),
        trials=r.typed(st_raw, "trials", int, 20, "analysis.stability"),
        magnitude=r.typed(st_raw, "magnitude", float, 0.1, "analysis.stability"),
        x_magnitude=None if x_mag is None else float(x_mag),
    )
    analysis = AnalysisConfig(
        scales=tuple(scales),
        sample_depth=r.typed(an_raw, "sample_depth", int, 8 if mode == "curve" else 4, "analysis"),
        seed=seed,
        stability=stab,
    )

    out_raw = raw.get("output", {})
    if not isinstance(out_raw, dict):
        r.fail("output", "expected an object")
    output = OutputConfig(
        dir=r.typed(out_raw, "dir", str, "out", "output"),
        prefix=r.typed(out_raw, "prefix", str, "hvfif", "output"),
        graymap=r.typed(out_raw, "graymap", bool, mode == "surface", "output"),
        bits=r.typed(out_raw, "bits", int, 8, "output"),
    )
    if output.bits not in (8, 16):
        r.fail("output.bits", "expected 8 or 16")
    return RunConfig(mode, data, quads, orientation, validation, ev, analysis, output, raw, source)


def load_config(path) -> RunConfig:
    path = Path(path)
    source = str(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(source, "", f"cannot read file ({exc.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(source, "", f"malformed JSON at line {exc.lineno}, column {exc.colno}") from None
    return parse_config(raw, source)
