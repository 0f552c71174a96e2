"""Command-line entry point: ``hvfif <command> --config <path> [--out <dir>] [--seed <u64>]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from . import analysis as an
from . import graymap
from .bivariate import (
    GridDataSet,
    build_bivariate,
    dimension_bounds_surface,
    estimate_dimension_surface,
    subdivide_surface,
)
from .config import COMMANDS, ConfigError, RunConfig, load_config
from .core import ConstructionError, ExtendedDataSet, FactorBoundError, NotContractiveError, build_univariate
from .evaluate import SampleSet, rb_iterate, subdivide
from .report import TOP_LEVEL_KEYS, dumps

EXIT_OK, EXIT_ERROR, EXIT_HYPOTHESIS = 0, 1, 2


def _where(exc: Exception, cfg: RunConfig) -> str:
    """Config location responsible for a construction error."""
    cell = getattr(exc, "interval", None)
    if cell is None:
        return "factors"
    if isinstance(cell, tuple):
        i, j = cell
        index = (i - 1) * (len(cfg.data["y"]) - 1) + (j - 1)
    else:
        index = cell - 1
    name = getattr(exc, "name", None)
    return f"factors[{index}]" + (f".{name}" if name else "")


def build_curve(cfg: RunConfig):
    data = ExtendedDataSet(cfg.data["x"], cfg.data["y"], cfg.data["z"])
    return build_univariate(data, cfg.factors, cfg.orientation, strict=cfg.validation == "strict")


def build_surface(cfg: RunConfig):
    data = GridDataSet(cfg.data["x"], cfg.data["y"], cfg.data["z"], cfg.data["t"])
    return build_bivariate(data, cfg.factors, strict=cfg.validation == "strict")


def sample_curve(h, cfg: RunConfig) -> SampleSet:
    ev = cfg.evaluator
    if ev.method == "rb_iterate":
        return rb_iterate(h, grid_size=ev.grid_size, max_iters=ev.max_iters, tol=ev.tol)
    return subdivide(h, ev.depth)


def contraction_doc(h) -> dict:
    doc = {
        "S": h.S,
        "contractive": h.S < 1 and not h.violations,
        "violations": [str(v) for v in h.violations],
    }
    if getattr(h, "contraction", None) is not None:
        doc["report"] = h.contraction.to_dict()
    else:
        doc["per_cell"] = h.per_cell
        doc["sign_condition"] = h.sign_condition
    return doc


def new_document(cfg: RunConfig, seed: int) -> dict:
    doc = dict.fromkeys(TOP_LEVEL_KEYS)
    doc["config_echo"] = {"config": cfg.raw, "seed": seed}
    return doc


def _smoothness_doc(h, samples: SampleSet):
    try:
        sc = an.smoothness_constants(h, samples)
    except an.HypothesisError as exc:
        return {"hypothesis_holds": False, "reason": str(exc), "constants": None}, None
    return {"hypothesis_holds": True, "reason": None, "constants": sc.to_dict()}, sc


def run_generate(cfg: RunConfig, out: Path, seed: int):
    h = build_curve(cfg)
    samples = sample_curve(h, cfg)
    samples.to_csv(out / f"{cfg.output.prefix}_samples.csv")
    if cfg.output.graymap:
        graymap.write_curve(out / f"{cfg.output.prefix}_curve.pgm", samples.x, samples.f1, bits=cfg.output.bits)
    ok = not h.violations and samples.converged
    return None, ok


def run_analyze(cfg: RunConfig, out: Path, seed: int):
    h = build_curve(cfg)
    depth = cfg.analysis.sample_depth
    needed = max(cfg.analysis.scales) + 2
    if depth < needed:
        raise ConfigError(cfg.source, "analysis.sample_depth", f"must be at least max(scales) + 2 = {needed}")
    samples = subdivide(h, depth)
    doc = new_document(cfg, seed)
    doc["contraction"] = contraction_doc(h)
    report = an.dimension_bounds(h)
    report.empirical = an.estimate_dimension(h, cfg.analysis.scales, samples)
    doc["dimension"] = report.to_dict()
    doc["smoothness"], _ = _smoothness_doc(h, samples)
    holder = an.empirical_holder(samples)
    doc["empirical"] = {
        "samples": {"method": samples.method, "depth": samples.depth, "count": len(samples)},
        "box_dimension": report.empirical.slope,
        "box_dimension_stderr": report.empirical.stderr,
        "holder": holder.to_dict(),
    }
    (out / f"{cfg.output.prefix}_analysis.json").write_text(dumps(doc))
    with open(out / f"{cfg.output.prefix}_boxcount.csv", "w", newline="\n") as fh:
        fh.write("epsilon,count\n")
        for r in report.empirical.records:
            fh.write(f"{r.epsilon:.17g},{r.count}\n")
    ok = (not h.violations and report.hypothesis.all_hold and doc["smoothness"]["hypothesis_holds"]
          and h.contraction.box_verified)
    return doc, ok


def run_stability(cfg: RunConfig, out: Path, seed: int):
    h = build_curve(cfg)
    st = cfg.analysis.stability
    doc = new_document(cfg, seed)
    doc["contraction"] = contraction_doc(h)
    reports = []
    hyp_ok, reason = True, None
    try:
        reports = an.stability_suite(h, st.kinds, st.trials, st.magnitude, seed, st.x_magnitude)
    except an.HypothesisError as exc:
        hyp_ok, reason = False, str(exc)
    if hyp_ok and any(k in ("x", "all") for k in st.kinds):
        doc["smoothness"], _ = _smoothness_doc(h, subdivide(h, min(8, an.depth_for_budget(h.n, 2 ** 18))))
    all_sat = all(r.satisfied for r in reports)
    doc["stability"] = {
        "hypothesis_holds": hyp_ok,
        "reason": reason,
        "seed": seed,
        "reports": [r.to_dict() for r in reports],
        "all_satisfied": all_sat,
    }
    (out / f"{cfg.output.prefix}_stability.json").write_text(dumps(doc))
    return doc, hyp_ok and not h.violations


def run_surface(cfg: RunConfig, out: Path, seed: int):
    h = build_surface(cfg)
    samples = subdivide_surface(h, cfg.evaluator.depth)
    samples.to_csv(out / f"{cfg.output.prefix}_surface.csv")
    if cfg.output.graymap:
        graymap.write_heightmap(out / f"{cfg.output.prefix}_surface.pgm", samples.f1, bits=cfg.output.bits)
    doc = new_document(cfg, seed)
    doc["contraction"] = contraction_doc(h)
    report = dimension_bounds_surface(h)
    if samples.n is not None:
        report.empirical = estimate_dimension_surface(samples, cfg.analysis.scales)
    doc["dimension"] = report.to_dict()
    doc["empirical"] = {
        "samples": {"method": samples.method, "depth": samples.depth, "count": int(samples.f1.size)},
        "box_dimension": None if report.empirical is None else report.empirical.slope,
    }
    (out / f"{cfg.output.prefix}_surface.json").write_text(dumps(doc))
    return doc, not h.violations and report.hypothesis.all_hold


RUNNERS = {
    "generate": run_generate,
    "analyze": run_analyze,
    "stability": run_stability,
    "surface": run_surface,
}


def run(command: str, cfg: RunConfig, out: Optional[Path] = None, seed: Optional[int] = None):
    """Execute ``command``; returns ``(exit_code, document)``."""
    if command == "surface" and cfg.mode != "surface":
        raise ConfigError(cfg.source, "mode", "the surface command needs mode 'surface'")
    if command != "surface" and cfg.mode != "curve":
        raise ConfigError(cfg.source, "mode", f"the {command} command needs mode 'curve'")
    out = Path(out if out is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.analysis.seed if seed is None else seed
    try:
        doc, ok = RUNNERS[command](cfg, out, seed)
    except (NotContractiveError, FactorBoundError) as exc:
        raise ConfigError(cfg.source, _where(exc, cfg), str(exc)) from None
    except ConstructionError as exc:
        raise ConfigError(cfg.source, "data", str(exc)) from None
    return (EXIT_OK if ok else EXIT_HYPOTHESIS), doc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hvfif", description="Hidden-variable fractal interpolation experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides analysis.seed)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("hvfif: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_ERROR
    try:
        cfg = load_config(args.config)
        code, _ = run(args.command, cfg, args.out, args.seed)
    except ConfigError as exc:
        print(f"hvfif: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, IndexError) as exc:
        print(f"hvfif: error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if code == EXIT_HYPOTHESIS:
        print("hvfif: warning: some hypothesis checks failed; results were still written", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
