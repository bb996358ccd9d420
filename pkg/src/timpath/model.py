"""Domain types shared by the raster, flow, objective and optimizer modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

FConKind = Literal["con", "log"]
FAreaKind = Literal["con", "lin", "squ", "log"]
FInitKind = Literal["none", "lin", "log"]

F_CON_KINDS = ("con", "log")
F_AREA_KINDS = ("con", "lin", "squ", "log")
F_INIT_KINDS = ("none", "lin", "log")


class ValidationError(ValueError):
    """A document or value violates a domain invariant."""


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MaterialGrid:
    """Material volume per cell plus the volume that left the grid.

    ``amounts`` is indexed ``[row, col]``; row ``r`` spans ``y`` in
    ``[r, r + 1)`` and column ``c`` spans ``x`` in ``[c, c + 1)`` in grid units.
    """

    amounts: np.ndarray
    cell_size: float = 1.0
    offgrid_sink: float = 0.0

    def __post_init__(self):
        amounts = _frozen_array(self.amounts)
        if amounts.ndim != 2:
            raise ValidationError("amounts must be a 2D array")
        if not np.all(np.isfinite(amounts)) or not math.isfinite(self.offgrid_sink):
            raise ValidationError("material amounts must be finite")
        if amounts.size and amounts.min() < 0:
            raise ValidationError("material amounts must be >= 0")
        if self.offgrid_sink < 0:
            raise ValidationError("offgrid_sink must be >= 0")
        if not self.cell_size > 0:
            raise ValidationError("cell_size must be > 0")
        object.__setattr__(self, "amounts", amounts)
        object.__setattr__(self, "offgrid_sink", float(self.offgrid_sink))

    @classmethod
    def empty(cls, width: int = 50, height: int = 50, cell_size: float = 1.0) -> MaterialGrid:
        return cls(np.zeros((height, width)), cell_size)

    @property
    def height(self) -> int:
        return self.amounts.shape[0]

    @property
    def width(self) -> int:
        return self.amounts.shape[1]

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size

    @property
    def heights(self) -> np.ndarray:
        """Material height per cell (volume / cell area)."""
        return self.amounts / self.cell_area

    @property
    def total_volume(self) -> float:
        return float(self.amounts.sum()) + self.offgrid_sink

    def __eq__(self, other):
        if not isinstance(other, MaterialGrid):
            return NotImplemented
        return (
            self.cell_size == other.cell_size
            and self.offgrid_sink == other.offgrid_sink
            and np.array_equal(self.amounts, other.amounts)
        )


@dataclass(frozen=True, eq=False)
class DispensePath:
    """Polyline in continuous grid coordinates with a constant feedrate.

    ``frozen`` flags individual coordinates (shape ``(n_points, 2)``) that an
    optimizer must leave untouched.
    """

    points: np.ndarray
    feedrate: float = 1.0
    frozen: np.ndarray | None = None

    def __post_init__(self):
        points = _frozen_array(self.points)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValidationError("path points must have shape (n, 2)")
        if len(points) < 2:
            raise ValidationError("a path needs at least 2 points")
        if not np.all(np.isfinite(points)):
            raise ValidationError("path points must be finite")
        if not (math.isfinite(self.feedrate) and self.feedrate >= 0):
            raise ValidationError(f"feedrate must be finite and >= 0, got {self.feedrate}")
        frozen = np.zeros(points.shape, bool) if self.frozen is None else self.frozen
        frozen = _frozen_array(frozen, bool)
        if frozen.shape != points.shape:
            raise ValidationError("frozen mask must match the shape of points")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "frozen", frozen)
        object.__setattr__(self, "feedrate", float(self.feedrate))

    @property
    def n_segments(self) -> int:
        return len(self.points) - 1

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.hypot(*np.diff(self.points, axis=0).T)

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())

    @property
    def volume(self) -> float:
        return self.feedrate * self.length

    def with_points(self, points) -> DispensePath:
        return DispensePath(points, self.feedrate, self.frozen)

    def with_feedrate(self, feedrate: float) -> DispensePath:
        return DispensePath(self.points, feedrate, self.frozen)

    def __eq__(self, other):
        if not isinstance(other, DispensePath):
            return NotImplemented
        return (
            self.feedrate == other.feedrate
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.frozen, other.frozen)
        )


@dataclass(frozen=True, eq=False)
class TargetAreas:
    """Co-registered grayscale masks: cooling surface, overflow area, taboo zones."""

    cool: np.ndarray
    over: np.ndarray
    tab: np.ndarray

    def __post_init__(self):
        masks = {}
        for name in ("cool", "over", "tab"):
            arr = _frozen_array(getattr(self, name))
            if arr.ndim != 2:
                raise ValidationError(f"mask '{name}' must be 2D")
            bad = np.argwhere(~((arr >= 0) & (arr <= 1)))
            if len(bad):
                r, c = (int(v) for v in bad[0])
                raise ValidationError(
                    f"mask '{name}' value {arr[r, c]!r} at row {r}, col {c} is outside [0, 1]"
                )
            masks[name] = arr
        shapes = {m.shape for m in masks.values()}
        if len(shapes) != 1:
            raise ValidationError(f"mask dimensions differ: {sorted(shapes)}")
        if not masks["cool"].sum() > 0:
            raise ValidationError("empty cooling surface: the cooling mask is all zero")
        for name, arr in masks.items():
            object.__setattr__(self, name, arr)

    @classmethod
    def from_cool_tab(cls, cool, tab=None) -> TargetAreas:
        """Overflow area is everything that is not cooling surface (taboo included)."""
        cool = np.asarray(cool, float)
        tab = np.zeros_like(cool) if tab is None else np.asarray(tab, float)
        return cls(cool, 1.0 - cool, tab)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cool.shape

    @property
    def cool_sum(self) -> float:
        return float(self.cool.sum())

    def __eq__(self, other):
        if not isinstance(other, TargetAreas):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, n), getattr(other, n)) for n in ("cool", "over", "tab")
        )


@dataclass(frozen=True)
class GapSpec:
    """Nominal gap height with its tolerance band and the compression step count."""

    g_final: float
    g_max: float | None = None
    g_min: float | None = None
    n_steps: int = 10

    def __post_init__(self):
        if self.g_max is None:
            object.__setattr__(self, "g_max", self.g_final)
        if self.g_min is None:
            object.__setattr__(self, "g_min", self.g_final)
        vals = (self.g_min, self.g_final, self.g_max)
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise ValidationError(f"gap heights must be finite and > 0, got {vals}")
        if not self.g_min <= self.g_final <= self.g_max:
            raise ValidationError(f"need g_min <= g_final <= g_max, got {vals}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValidationError("n_steps must be an integer >= 1")


@dataclass(frozen=True)
class Product:
    """A cooling-surface geometry: target masks, cell size and gap specification."""

    areas: TargetAreas
    gap: GapSpec
    cell_size: float = 1.0
    name: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.cell_size) and self.cell_size > 0):
            raise ValidationError("cell_size must be > 0")

    @property
    def width(self) -> int:
        return self.areas.shape[1]

    @property
    def height(self) -> int:
        return self.areas.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.areas.shape


@dataclass(frozen=True)
class ObjectiveConfig:
    """Term weights and weighting-function selectors of the objective.

    The defaults weight taboo contact and void area at 100 and initial
    overflow at 1000 relative to an overflow weight of 1.
    """

    w_comp_cool: float = 0.0
    w_comp_over: float = 1.0
    w_comp_tab: float = 100.0
    w_init_over: float = 1000.0
    w_voidBin: float = 0.0
    w_voidArea: float = 100.0
    f_con: FConKind = "con"
    f_area: FAreaKind = "con"
    f_init: FInitKind = "lin"
    lin_slope: float = 1.0

    def __post_init__(self):
        for name in ("w_comp_cool", "w_comp_over", "w_comp_tab", "w_init_over",
                     "w_voidBin", "w_voidArea"):
            w = getattr(self, name)
            if not (math.isfinite(w) and w >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {w}")
        for name, allowed in (("f_con", F_CON_KINDS), ("f_area", F_AREA_KINDS),
                              ("f_init", F_INIT_KINDS)):
            if getattr(self, name) not in allowed:
                raise ValidationError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if not math.isfinite(self.lin_slope):
            raise ValidationError("lin_slope must be finite")

    def scaled(self, factor: float) -> ObjectiveConfig:
        """Copy with every weight multiplied by ``factor``."""
        from dataclasses import replace

        return replace(
            self,
            w_comp_cool=self.w_comp_cool * factor,
            w_comp_over=self.w_comp_over * factor,
            w_comp_tab=self.w_comp_tab * factor,
            w_init_over=self.w_init_over * factor,
            w_voidBin=self.w_voidBin * factor,
            w_voidArea=self.w_voidArea * factor,
        )


@dataclass(frozen=True)
class GapReport:
    """Coverage terms and statistics at one gap height (tolerance mode)."""

    gap: float
    L_comp_cool: float
    L_comp_over: float
    L_comp_tab: float
    coverage_fraction: float
    overflow_ratio: float
    taboo_violation_fraction: float


@dataclass(frozen=True)
class EvaluationReport:
    """Per-term losses and statistics of one path evaluation.

    In tolerance mode the coverage terms are summed over the g_max and g_min
    evaluations, ``coverage_fraction`` is taken at g_max and the overflow and
    taboo statistics at g_min (the respective worst cases).
    """

    total_loss: float
    L_comp_cool: float
    L_comp_over: float
    L_comp_tab: float
    L_init_over: float
    L_voidBin_init: float
    L_voidBin_med: float
    L_voidArea_init: float
    L_voidArea_med: float
    coverage_fraction: float
    overflow_ratio: float
    taboo_violation_fraction: float
    void_area_fraction: float
    void_count_init: int = 0
    void_count_med: int = 0
    void_med_gap: float | None = None
    coverage_strategy: str = "S-con"
    feedrate: float = 0.0
    tolerance_mode: bool = False
    per_gap: tuple[GapReport, ...] = ()
    trace: object | None = field(default=None, compare=False, repr=False)

    @property
    def void_free(self) -> bool:
        return self.void_count_init == 0 and self.void_count_med == 0


def weighted_total(terms: dict[str, float], config: ObjectiveConfig) -> float:
    """Weighted sum of the objective terms, always accumulated in this order."""
    parts = (
        config.w_comp_cool * terms["L_comp_cool"],
        config.w_comp_over * terms["L_comp_over"],
        config.w_comp_tab * terms["L_comp_tab"],
        config.w_init_over * terms["L_init_over"],
        config.w_voidBin * terms["L_voidBin_init"],
        config.w_voidBin * terms["L_voidBin_med"],
        config.w_voidArea * terms["L_voidArea_init"],
        config.w_voidArea * terms["L_voidArea_med"],
    )
    total = 0.0
    for p in parts:
        total += p
    return total


def total_required_volume(areas: TargetAreas, gap: GapSpec, cell_size: float) -> float:
    """Volume that covers exactly the whole cooling surface at the nominal gap."""
    if not areas.cool_sum > 0:
        raise ValidationError("empty cooling surface: the cooling mask is all zero")
    return areas.cool_sum * cell_size * cell_size * gap.g_final


def polyline_length(points) -> float:
    pts = np.asarray(points, float)
    return float(np.hypot(*np.diff(pts, axis=0).T).sum())


def feedrate_for_path(points, required_volume: float) -> float:
    """Constant feedrate that dispenses ``required_volume`` along ``points``."""
    length = polyline_length(points)
    if not length > 0:
        raise ValidationError("zero-length path: cannot derive a feedrate")
    return required_volume / length
