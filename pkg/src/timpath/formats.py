"""Versioned JSON documents for products, paths, configs, reports and trials.

Every document carries ``"schema"`` (its kind) and ``"version"``. Syntax
problems raise :class:`FormatError` with the line number; well-formed
documents with bad content raise :class:`ValidationError`.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .model import (
    DispensePath,
    EvaluationReport,
    GapReport,
    GapSpec,
    ObjectiveConfig,
    Product,
    TargetAreas,
    ValidationError,
)
from .optimizer import CmaesConfig, TrialResult

VERSION = 1


class FormatError(ValueError):
    """The text is not a well-formed document."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        prefix = ", ".join(where) + ": " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.source = source


def parse(text: str, kind: str, source: str | None = None) -> dict:
    """Decode ``text`` and check it is a ``kind`` document of a known version."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg + f" (column {exc.colno})", exc.lineno, source) from None
    if not isinstance(doc, dict):
        raise FormatError("top level must be an object", 1, source)
    found = doc.get("schema")
    if found != f"timpath/{kind}":
        raise FormatError(f"expected schema 'timpath/{kind}', found {found!r}", None, source)
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported {kind} version {doc.get('version')!r}", None, source)
    return doc


def _dump(value, indent: int) -> str:
    # lists of scalars stay on one line so mask rows remain readable
    pad = " " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump(v, indent + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + " " * indent + "}"
    if isinstance(value, list) and any(isinstance(v, (dict, list)) for v in value):
        items = [pad + _dump(v, indent + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + " " * indent + "]"
    return json.dumps(value, allow_nan=False)


def dumps(doc: dict) -> str:
    return _dump(doc, 0) + "\n"


def read(path, kind: str) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read: {exc.strerror}", None, str(path)) from None
    return parse(text, kind, str(path))


def header(kind: str) -> dict:
    return {"schema": f"timpath/{kind}", "version": VERSION}


# floats that JSON cannot hold are written as strings
def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _unnum(x, name: str):
    if isinstance(x, bool) or x is None:
        raise ValidationError(f"{name} must be a number")
    if isinstance(x, (int, float)):
        return float(x)
    if x in ("inf", "-inf", "nan"):
        return float(x)
    raise ValidationError(f"{name} must be a number, got {x!r}")


def _get(doc: dict, key: str, where: str):
    if key not in doc:
        raise ValidationError(f"{where}: missing field '{key}'")
    return doc[key]


def _matrix(rows, name: str, height: int | None = None, width: int | None = None):
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise ValidationError(f"mask '{name}' must be a list of rows")
    lengths = {len(r) for r in rows}
    if len(lengths) > 1:
        raise ValidationError(f"mask '{name}' is not rectangular (row lengths {sorted(lengths)})")
    for r, row in enumerate(rows):
        for c, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValidationError(f"mask '{name}' value {v!r} at row {r}, col {c} is not a number")
    arr = np.array(rows, dtype=float).reshape(len(rows), lengths.pop() if lengths else 0)
    if height is not None and arr.shape != (height, width):
        raise ValidationError(
            f"mask '{name}' has shape {arr.shape[0]}x{arr.shape[1]}, "
            f"document declares {height}x{width}"
        )
    return arr


# products


def gap_to_doc(gap: GapSpec) -> dict:
    return {"g_final": gap.g_final, "g_max": gap.g_max, "g_min": gap.g_min,
            "n_steps": gap.n_steps}


def gap_from_doc(doc: dict) -> GapSpec:
    if not isinstance(doc, dict):
        raise ValidationError("gap must be an object")
    g_final = _unnum(_get(doc, "g_final", "gap"), "g_final")
    g_max = doc.get("g_max")
    g_min = doc.get("g_min")
    n_steps = doc.get("n_steps", 10)
    if isinstance(n_steps, bool) or not isinstance(n_steps, int):
        raise ValidationError("n_steps must be an integer")
    return GapSpec(
        g_final,
        None if g_max is None else _unnum(g_max, "g_max"),
        None if g_min is None else _unnum(g_min, "g_min"),
        n_steps,
    )


def _mask_rows(arr: np.ndarray) -> list:
    # integral values are written as ints, which keeps binary masks compact
    return [[int(v) if v.is_integer() else v for v in row] for row in arr.tolist()]


def product_to_doc(product: Product) -> dict:
    areas = product.areas
    return {
        **header("product"),
        "name": product.name,
        "width": product.width,
        "height": product.height,
        "cell_size": product.cell_size,
        "gap": gap_to_doc(product.gap),
        "masks": {name: _mask_rows(getattr(areas, name)) for name in ("cool", "over", "tab")},
    }


def product_from_doc(doc: dict) -> Product:
    """Build a product; the overflow mask defaults to ``1 - cool`` when omitted."""
    width = _get(doc, "width", "product")
    height = _get(doc, "height", "product")
    for name, v in (("width", width), ("height", height)):
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ValidationError(f"{name} must be a positive integer")
    masks = _get(doc, "masks", "product")
    if not isinstance(masks, dict):
        raise ValidationError("masks must be an object")
    cool = _matrix(_get(masks, "cool", "masks"), "cool", height, width)
    tab = (_matrix(masks["tab"], "tab", height, width) if "tab" in masks
           else np.zeros_like(cool))
    over = (_matrix(masks["over"], "over", height, width) if "over" in masks
            else 1.0 - cool)
    areas = TargetAreas(cool, over, tab)
    cell_size = _unnum(doc.get("cell_size", 1.0), "cell_size")
    return Product(areas, gap_from_doc(_get(doc, "gap", "product")), cell_size,
                   str(doc.get("name", "")))


def load_product(path) -> Product:
    """Read a product document, or a colour pixmap (``.ppm``) with unit gap."""
    if str(path).lower().endswith(".ppm"):
        return load_product_ppm(path)
    return product_from_doc(read(path, "product"))


def areas_from_rgb(rgb: np.ndarray) -> TargetAreas:
    """Masks from colour: green is cooling, red is taboo, white is overflow.

    Lower saturation encodes a fractional assignment, so a cell's cooling
    share is how much green exceeds the other channels.
    """
    rgb = np.asarray(rgb, dtype=float)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    cool = np.clip((g - np.maximum(r, b)) / 255.0, 0.0, 1.0)
    tab = np.clip((r - np.maximum(g, b)) / 255.0, 0.0, 1.0)
    return TargetAreas(cool, 1.0 - cool, tab)


def load_product_ppm(path, gap: GapSpec = GapSpec(1.0), cell_size: float = 1.0) -> Product:
    from .render import read_ppm

    rgb = read_ppm(path)
    return Product(areas_from_rgb(rgb), gap, cell_size, Path(path).stem)


# paths


def path_to_doc(path: DispensePath, feedrate: bool = True) -> dict:
    doc = {**header("path"), "points": path.points.tolist()}
    doc["feedrate"] = path.feedrate if feedrate else None
    if path.frozen.any():
        doc["frozen"] = path.frozen.tolist()
    return doc


def path_from_doc(doc: dict) -> tuple[np.ndarray, float | None, np.ndarray | None]:
    """Points, feedrate (None: derive from the product) and frozen mask."""
    pts = _get(doc, "points", "path")
    if not isinstance(pts, list) or not all(
        isinstance(p, list) and len(p) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
        for p in pts
    ):
        raise ValidationError("points must be a list of [x, y] number pairs")
    points = np.array(pts, dtype=float).reshape(-1, 2)
    feedrate = doc.get("feedrate")
    feedrate = None if feedrate is None else _unnum(feedrate, "feedrate")
    frozen = doc.get("frozen")
    if frozen is not None:
        if not isinstance(frozen, list) or not all(
            isinstance(f, list) and len(f) == 2 and all(isinstance(v, bool) for v in f)
            for f in frozen
        ):
            raise ValidationError("frozen must be a list of [bool, bool] pairs")
        frozen = np.array(frozen, dtype=bool).reshape(-1, 2)
    # let DispensePath check the invariants
    DispensePath(points, 1.0 if feedrate is None else feedrate, frozen)
    return points, feedrate, frozen


def path_from_full_doc(doc: dict) -> DispensePath:
    points, feedrate, frozen = path_from_doc(doc)
    if feedrate is None:
        raise ValidationError("path document has no feedrate")
    return DispensePath(points, feedrate, frozen)


# objective and search configs

_CONFIG_FIELDS = [f.name for f in fields(ObjectiveConfig)]
_CMAES_FIELDS = [f.name for f in fields(CmaesConfig)]


def config_to_doc(config: ObjectiveConfig) -> dict:
    return {**header("config"), **asdict(config)}


def _config_values(doc: dict, where: str) -> dict:
    unknown = set(doc) - set(_CONFIG_FIELDS) - {"schema", "version"}
    if unknown:
        raise ValidationError(f"{where}: unknown fields {sorted(unknown)}")
    values = {}
    for name in _CONFIG_FIELDS:
        if name not in doc:
            continue
        v = doc[name]
        if name.startswith("f_"):
            if not isinstance(v, str):
                raise ValidationError(f"{name} must be a string")
            values[name] = v
        else:
            values[name] = _unnum(v, name)
    return values


def config_from_doc(doc: dict) -> ObjectiveConfig:
    """Missing fields keep their defaults."""
    return ObjectiveConfig(**_config_values(doc, "config"))


def cmaes_to_dict(cfg: CmaesConfig) -> dict:
    return asdict(cfg)


def cmaes_from_dict(d: dict) -> CmaesConfig:
    unknown = set(d) - set(_CMAES_FIELDS)
    if unknown:
        raise ValidationError(f"cmaes: unknown fields {sorted(unknown)}")
    return CmaesConfig(**d)


# reports and trials

_GAP_REPORT_FIELDS = [f.name for f in fields(GapReport)]
_REPORT_FLOATS = [
    "total_loss", "L_comp_cool", "L_comp_over", "L_comp_tab", "L_init_over",
    "L_voidBin_init", "L_voidBin_med", "L_voidArea_init", "L_voidArea_med",
    "coverage_fraction", "overflow_ratio", "taboo_violation_fraction",
    "void_area_fraction", "feedrate",
]


def report_to_doc(report: EvaluationReport) -> dict:
    doc = header("report")
    for name in _REPORT_FLOATS:
        doc[name] = _num(getattr(report, name))
    doc["void_count_init"] = report.void_count_init
    doc["void_count_med"] = report.void_count_med
    doc["void_med_gap"] = _num(report.void_med_gap)
    doc["coverage_strategy"] = report.coverage_strategy
    doc["tolerance_mode"] = report.tolerance_mode
    doc["per_gap"] = [{k: _num(getattr(g, k)) for k in _GAP_REPORT_FIELDS}
                      for g in report.per_gap]
    return doc


def report_from_doc(doc: dict) -> EvaluationReport:
    values = {name: _unnum(_get(doc, name, "report"), name) for name in _REPORT_FLOATS}
    per_gap = tuple(
        GapReport(**{k: _unnum(_get(g, k, "per_gap"), k) for k in _GAP_REPORT_FIELDS})
        for g in doc.get("per_gap", [])
    )
    med_gap = doc.get("void_med_gap")
    return EvaluationReport(
        **values,
        void_count_init=int(doc.get("void_count_init", 0)),
        void_count_med=int(doc.get("void_count_med", 0)),
        void_med_gap=None if med_gap is None else _unnum(med_gap, "void_med_gap"),
        coverage_strategy=str(doc.get("coverage_strategy", "S-con")),
        tolerance_mode=bool(doc.get("tolerance_mode", False)),
        per_gap=per_gap,
    )


def trial_to_doc(trial: TrialResult, extra: dict | None = None) -> dict:
    doc = {
        **header("trial"),
        "index": trial.index,
        "seed": trial.seed,
        "n_segments": trial.n_segments,
        "evaluations": trial.evaluations,
        "iterations": trial.iterations,
        "stop_reason": trial.stop_reason,
        "error": trial.error,
        "best_path": None if trial.best_path is None else path_to_doc(trial.best_path),
        "best_report": None if trial.best_report is None else report_to_doc(trial.best_report),
        "loss_history": [_num(v) for v in trial.loss_history],
    }
    if extra:
        doc.update(extra)
    return doc


def trial_from_doc(doc: dict) -> TrialResult:
    path = doc.get("best_path")
    report = doc.get("best_report")
    return TrialResult(
        best_path=None if path is None else path_from_full_doc(path),
        best_report=None if report is None else report_from_doc(report),
        loss_history=tuple(_unnum(v, "loss_history") for v in doc.get("loss_history", [])),
        evaluations=int(_get(doc, "evaluations", "trial")),
        seed=int(_get(doc, "seed", "trial")),
        n_segments=int(_get(doc, "n_segments", "trial")),
        iterations=int(doc.get("iterations", 0)),
        stop_reason=str(doc.get("stop_reason", "")),
        error=doc.get("error"),
        index=int(doc.get("index", 0)),
    )
