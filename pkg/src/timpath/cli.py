"""Command line interface: evaluate, optimize, compare, sweep and render.

Exit codes: 0 success, 2 unreadable or malformed input, 3 invalid content,
4 flow relaxation did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import formats
from .flow import MAX_RELAX_ITERS, FlowConvergenceError, normalize_compressed
from .formats import FormatError
from .model import DispensePath, ObjectiveConfig, Product, ValidationError
from .objective import Evaluator
from .optimizer import CmaesConfig, calibrate_amount, execute, rank_trials, trial_specs
from .raster import RasterSettings, rasterize_coarse
from .render import render_heat_table, render_state, write_ppm
from .store import RunStore
from .sweep import rows_to_doc, run_sweep, sweep_from_doc

log = logging.getLogger("timpath")

EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_FLOW = 4


def _segments(text: str) -> tuple[int, int]:
    try:
        if "-" in text:
            lo, hi = text.split("-", 1)
            return int(lo), int(hi)
        return int(text), int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or LO-HI, got {text!r}") from None


def _load_config(path) -> ObjectiveConfig:
    if path is None:
        return ObjectiveConfig()
    return formats.config_from_doc(formats.read(path, "config"))


def _load_path(path, ev: Evaluator) -> DispensePath:
    """A path document; without a feedrate it dispenses the product's required volume."""
    points, feedrate, frozen = formats.path_from_doc(formats.read(path, "path"))
    if feedrate is None:
        return ev.path_for(points, frozen)
    return DispensePath(points, feedrate, frozen)


def _emit(doc: dict, out: Path | None, name: str) -> None:
    text = formats.dumps(doc)
    sys.stdout.write(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def _render_pair(out: Path, product: Product, path: DispensePath, ev: Evaluator,
                 report, ascii_: bool, scale: int) -> None:
    areas = product.areas
    initial = rasterize_coarse(path, product.shape, product.cell_size, ev.raster)
    first_gap = report.per_gap[0].gap if report.per_gap else ev.gap.g_final
    write_ppm(out / "initial.ppm",
              render_state(product.shape, areas.cool, areas.tab,
                           np.minimum(initial.heights / first_gap, 1.0), path.points, scale),
              not ascii_)
    trace = report.trace
    write_ppm(out / "compressed.ppm",
              render_state(product.shape, areas.cool, areas.tab,
                           normalize_compressed(trace.final, trace.snapshots[-1][0]),
                           path.points, scale),
              not ascii_)


def cmd_evaluate(args) -> int:
    product = formats.load_product(args.product)
    config = _load_config(args.config)
    ev = Evaluator(product, config, max_relax_iters=args.max_relax_iters)
    path = _load_path(args.path, ev)
    report = ev.evaluate(path, args.tolerance_mode, keep_trace=True)
    out = Path(args.out_dir) if args.out_dir else None
    _emit(formats.report_to_doc(report), out, "report.json")
    if out is not None:
        _render_pair(out, product, path, ev, report, args.ascii, args.scale)
    return 0


def _summary_line(rank: int, trial) -> str:
    r = trial.best_report
    if r is None:
        return f"{rank:3d}  trial {trial.index:5d}  seed {trial.seed}  FAILED: " + \
            trial.error.splitlines()[0]
    return (f"{rank:3d}  trial {trial.index:5d}  seed {trial.seed:6d}  "
            f"segments {trial.n_segments:2d}  coverage {r.coverage_fraction:.4f}  "
            f"taboo {r.taboo_violation_fraction:.4f}  void {r.void_area_fraction:.4f}  "
            f"loss {r.total_loss:.6g}")


def cmd_optimize(args) -> int:
    product = formats.load_product(args.product)
    config = _load_config(args.config)
    cmaes = CmaesConfig(max_iterations=args.iterations, seed=args.seed,
                        population_size=args.population, sigma0=args.sigma0,
                        restart_count=args.restarts)
    out = Path(args.out_dir)
    meta = {
        "product": formats.product_to_doc(product),
        "config": formats.config_to_doc(config),
        "cmaes": formats.cmaes_to_dict(cmaes),
        "segments": list(args.segments),
        "tolerance_mode": args.tolerance_mode,
    }
    store = RunStore.create(out, meta, resume=args.resume)
    start = store.next_index()
    specs = trial_specs(product, config, None, args.segments, args.trials, cmaes,
                        RasterSettings(), args.tolerance_mode, start=start)

    def persist(trial):
        store.append(trial)
        log.info("%s", _summary_line(0, trial)[5:])

    execute(specs, args.parallelism, persist)
    ranked = rank_trials(store.load_trials())
    top = ranked[: args.top_k]
    for k, trial in enumerate(top, 1):
        print(_summary_line(k, trial))
        if trial.best_path is not None:
            (out / f"best-{k:02d}.json").write_text(
                formats.dumps(formats.path_to_doc(trial.best_path)))
    summary = {
        **formats.header("summary"),
        "top": [{"rank": k, "index": t.index, "seed": t.seed,
                 "coverage_fraction": None if t.best_report is None
                 else t.best_report.coverage_fraction,
                 "total_loss": None if t.best_report is None
                 else formats._num(t.best_report.total_loss)}
                for k, t in enumerate(top, 1)],
    }
    (out / "summary.json").write_text(formats.dumps(summary))
    return 0


def cmd_compare(args) -> int:
    product = formats.load_product(args.product)
    ev = Evaluator(product, _load_config(args.config))
    results = {}
    failed = False
    for role, file in (("expert", args.expert), ("optimized", args.optimized)):
        path = _load_path(file, ev)
        entry = {"file": str(file), "n_segments": path.n_segments}
        try:
            cal = calibrate_amount(path, product, ev.gap, args.coverage)
        except ValidationError as exc:
            entry["error"] = str(exc)
            failed = True
        else:
            report = ev.evaluate(path.with_feedrate(cal.feedrate))
            entry.update(
                feedrate=cal.feedrate,
                volume=cal.volume,
                coverage_fraction=report.coverage_fraction,
                overflow_ratio=formats._num(report.overflow_ratio),
                has_voids=not report.void_free,
                taboo_violation_fraction=report.taboo_violation_fraction,
                taboo_violated=report.taboo_violation_fraction > 0,
            )
        results[role] = entry
    doc = {**formats.header("comparison"), "target_coverage": args.coverage, **results}
    if "coverage_fraction" in results["expert"] and "coverage_fraction" in results["optimized"]:
        doc["coverage_difference"] = abs(results["expert"]["coverage_fraction"]
                                         - results["optimized"]["coverage_fraction"])
    _emit(doc, Path(args.out_dir) if args.out_dir else None, "comparison.json")
    return EXIT_VALIDATION if failed else 0


def cmd_sweep(args) -> int:
    product = formats.load_product(args.product)
    sweep = sweep_from_doc(formats.read(args.sweep, "sweep"))
    if args.runs is not None:
        sweep = replace(sweep, runs_per_config=args.runs)
    if args.iterations is not None:
        sweep = replace(sweep, iterations=args.iterations)
    out = Path(args.out_dir) if args.out_dir else None

    def report_row(k, row):
        log.info("config %d: coverage %.3f convergence %.3f average %.3f",
                 k, row.coverage_ratio, row.convergence_ratio, row.average_performance)

    rows = run_sweep(product, sweep, args.parallelism, out, on_row=report_row)
    _emit(rows_to_doc(rows), out, "sweep-result.json")
    if out is not None:
        table = [[r.coverage_ratio, r.convergence_ratio, r.average_performance] for r in rows]
        write_ppm(out / "sweep-heat.ppm", render_heat_table(table), not args.ascii)
    return 0


def cmd_render(args) -> int:
    product = formats.load_product(args.product)
    areas = product.areas
    fill = None
    points = None
    if args.path:
        ev = Evaluator(product, _load_config(args.config))
        path = _load_path(args.path, ev)
        points = path.points
        if args.stage == "initial":
            grid = rasterize_coarse(path, product.shape, product.cell_size)
            fill = np.minimum(grid.heights / ev.gap.g_final, 1.0)
        else:
            report = ev.evaluate(path, keep_trace=True)
            fill = normalize_compressed(report.trace.final, ev.gap.g_final)
    img = render_state(product.shape, areas.cool, areas.tab, fill, points, args.scale)
    write_ppm(args.out, img, not args.ascii)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="timpath", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, path=False):
        sp.add_argument("--product", required=True, help="product document or colour .ppm")
        sp.add_argument("--config", help="objective config document (defaults if omitted)")
        if path:
            sp.add_argument("--path", required=True, help="path document")

    e = sub.add_parser("evaluate", help="evaluate one path")
    common(e, path=True)
    e.add_argument("--tolerance-mode", action="store_true")
    e.add_argument("--out-dir")
    e.add_argument("--scale", type=int, default=8)
    e.add_argument("--ascii", action="store_true", help="write P3 instead of P6 images")
    e.add_argument("--max-relax-iters", type=int, default=MAX_RELAX_ITERS,
                   help="relaxation steps allowed per gap level")
    e.set_defaults(func=cmd_evaluate)

    o = sub.add_parser("optimize", help="run optimization trials")
    common(o)
    o.add_argument("--trials", type=int, default=1)
    o.add_argument("--segments", type=_segments, default=(5, 10), help="N or LO-HI")
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--iterations", type=int, default=1000)
    o.add_argument("--population", type=int)
    o.add_argument("--sigma0", type=float)
    o.add_argument("--restarts", type=int, default=0)
    o.add_argument("--parallelism", type=int, default=1)
    o.add_argument("--tolerance-mode", action="store_true")
    o.add_argument("--out-dir", required=True)
    o.add_argument("--top-k", type=int, default=5)
    o.add_argument("--resume", action="store_true", help="append to an existing run")
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("compare", help="overflow of two paths at equal coverage")
    c.add_argument("--product", required=True)
    c.add_argument("--config")
    c.add_argument("--expert", required=True)
    c.add_argument("--optimized", required=True)
    c.add_argument("--coverage", type=float, default=0.98, help="common target coverage")
    c.add_argument("--out-dir")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="hyperparameter sweep")
    s.add_argument("--product", required=True)
    s.add_argument("--sweep", required=True)
    s.add_argument("--runs", type=int, help="override runs per config")
    s.add_argument("--iterations", type=int, help="override iterations")
    s.add_argument("--parallelism", type=int, default=1)
    s.add_argument("--out-dir")
    s.add_argument("--ascii", action="store_true")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("render", help="render target areas with an optional path")
    r.add_argument("--product", required=True)
    r.add_argument("--config")
    r.add_argument("--path")
    r.add_argument("--stage", choices=("initial", "final"), default="final")
    r.add_argument("--out", required=True)
    r.add_argument("--scale", type=int, default=8)
    r.add_argument("--ascii", action="store_true")
    r.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FlowConvergenceError as exc:
        print(f"flow model: {exc}", file=sys.stderr)
        return EXIT_FLOW
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
