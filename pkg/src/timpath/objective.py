"""Scalar objective for a dispense path: coverage, initial overflow and void terms.

Distance-weighted terms use the image-library convention for the distance
transform of a target mask: cells inside the mask get their distance to the
nearest cell outside it, cells outside get zero. Material that ends up off
the grid is treated as overflow, as if it had landed in the overflow area at
the largest weighted distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import FlowTrace, compress, compress_two_stage, normalize_compressed, MAX_RELAX_ITERS
from .imageops import distance_to_outside, enclosed_voids
from .model import (
    DispensePath,
    EvaluationReport,
    GapReport,
    GapSpec,
    ObjectiveConfig,
    Product,
    TargetAreas,
    ValidationError,
    feedrate_for_path,
    total_required_volume,
    weighted_total,
)
from .raster import RasterSettings, rasterize_coarse, rasterize_fine

# binarization threshold for "material present" on normalized fill ratios
THETA = 1e-6
# the log weighting clamps its argument at 1 - LOG_EPS
LOG_EPS = 1e-6


def weighting(kind: str, x, slope: float = 1.0):
    """Apply the weighting function ``kind`` elementwise."""
    x = np.asarray(x, dtype=float)
    if kind == "none":
        out = np.zeros_like(x)
    elif kind == "con":
        out = x
    elif kind == "lin":
        out = slope * x
    elif kind == "squ":
        out = x * x
    elif kind == "log":
        out = -np.log1p(-np.minimum(x, 1.0 - LOG_EPS))
    else:
        raise ValueError(f"unknown weighting function {kind!r}")
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WeightingFunction:
    kind: str
    slope: float = 1.0

    def __call__(self, x):
        return weighting(self.kind, x, self.slope)


def s_con(m_comp, target, cool_sum: float, f_con: str, *, is_cool: bool,
          extra_cover: float = 0.0) -> float:
    """Coverage term from summed fill ratios, normalized by the cooling-area size.

    ``extra_cover`` adds fully covered cells that are not on the grid
    (off-grid material, overflow only).
    """
    if not cool_sum > 0:
        raise ValidationError("empty cooling surface: cannot normalize coverage")
    cover = float(np.sum(m_comp * target)) + extra_cover
    clip_cover = min(cover / cool_sum, 1.0)
    if is_cool:
        return weighting(f_con, 1.0 - clip_cover)
    return weighting(f_con, clip_cover)


@dataclass(frozen=True)
class AreaNormalizer:
    """Cooling-pass constants reused for the overflow and taboo passes."""

    max_dist: float
    max_mat_sum: float


def _inside_distance(target) -> np.ndarray:
    mask = np.asarray(target) > 0
    if not mask.any():
        return np.zeros(mask.shape)
    return distance_to_outside(mask)


def cooling_normalizer(cool, f_area: str, slope: float = 1.0) -> AreaNormalizer:
    dist = _inside_distance(cool)
    max_dist = float(dist.max())
    if not max_dist > 0:
        raise ValidationError("empty cooling surface: cannot derive distance weights")
    weights = weighting(f_area, dist / max_dist, slope)
    return AreaNormalizer(max_dist, float(np.sum(weights)))


def area_weights(target, f_area: str, max_dist: float, slope: float = 1.0) -> np.ndarray:
    """Clipped, normalized and weighted distance field of ``target``."""
    dist = np.minimum(_inside_distance(target), max_dist)
    return weighting(f_area, dist / max_dist, slope)


def s_area(m_comp, target, f_area: str, normalizer: AreaNormalizer | None = None, *,
           slope: float = 1.0, weights=None, extra_cells: float = 0.0) -> float:
    """Coverage term from the binarized cover weighted by distance into ``target``.

    Without ``normalizer`` the target is the cooling surface and the
    normalizer is derived from it. ``extra_cells`` counts covered cells at
    the largest distance that lie off the grid.
    """
    if normalizer is None:
        normalizer = cooling_normalizer(target, f_area, slope)
    if weights is None:
        weights = area_weights(target, f_area, normalizer.max_dist, slope)
    if not normalizer.max_mat_sum > 0:
        return 0.0
    covered = np.asarray(m_comp) > THETA
    total = float(np.sum(weights[covered]))
    if extra_cells:
        total += extra_cells * weighting(f_area, 1.0, slope)
    return float(np.clip(total / normalizer.max_mat_sum, 0.0, 1.0))


def init_weights(over, f_init: str, max_dist: float | None = None, slope: float = 1.0):
    over = np.asarray(over)
    if max_dist is None:
        max_dist = min(over.shape) / 2.0
    dist = np.minimum(_inside_distance(over), max_dist)
    return weighting(f_init, dist / max_dist, slope)


def s_init(m_initial, over, f_init: str, *, max_dist: float | None = None,
           slope: float = 1.0, weights=None) -> float:
    """Penalty for dispensing into the overflow area, growing with distance.

    Distances are clipped at half the grid size unless ``max_dist`` is given.
    """
    if weights is None:
        weights = init_weights(over, f_init, max_dist, slope)
    max_mat_sum = float(np.sum(weights))
    if not max_mat_sum > 0:
        return 0.0
    covered = np.asarray(m_initial) > 0
    return float(np.sum(weights[covered])) / max_mat_sum


@dataclass(frozen=True)
class PreparedAreas:
    """Product-dependent constants of the coverage and initial-overflow terms."""

    cool_sum: float
    normalizer: AreaNormalizer | None
    weights: dict
    init: np.ndarray

    @classmethod
    def build(cls, areas: TargetAreas, config: ObjectiveConfig) -> PreparedAreas:
        slope = config.lin_slope
        normalizer = None
        weights = {}
        if config.f_area != "con":
            normalizer = cooling_normalizer(areas.cool, config.f_area, slope)
            for name in ("cool", "over", "tab"):
                weights[name] = area_weights(getattr(areas, name), config.f_area,
                                             normalizer.max_dist, slope)
        init = init_weights(areas.over, config.f_init, slope=slope)
        return cls(areas.cool_sum, normalizer, weights, init)


def coverage_loss(m_comp, areas: TargetAreas, config: ObjectiveConfig, *,
                  prepared: PreparedAreas | None = None,
                  offgrid_cells: float = 0.0) -> tuple[float, float, float]:
    """(L_comp_cool, L_comp_over, L_comp_tab) from S-con or S-area, never both."""
    if prepared is None:
        prepared = PreparedAreas.build(areas, config)
    if config.f_area == "con":
        cs = prepared.cool_sum
        return (
            s_con(m_comp, areas.cool, cs, config.f_con, is_cool=True),
            s_con(m_comp, areas.over, cs, config.f_con, is_cool=False, extra_cover=offgrid_cells),
            s_con(m_comp, areas.tab, cs, config.f_con, is_cool=False),
        )
    norm = prepared.normalizer
    w = prepared.weights
    kw = dict(slope=config.lin_slope)
    return (
        s_area(m_comp, areas.cool, config.f_area, norm, weights=w["cool"], **kw),
        s_area(m_comp, areas.over, config.f_area, norm, weights=w["over"],
               extra_cells=offgrid_cells, **kw),
        s_area(m_comp, areas.tab, config.f_area, norm, weights=w["tab"], **kw),
    )


@dataclass(frozen=True)
class VoidTerms:
    L_voidBin_init: float
    L_voidArea_init: float
    L_voidBin_med: float
    L_voidArea_med: float
    count_init: int
    area_init: float
    count_med: int
    area_med: float
    gap_med: float | None


def void_losses(fine_mask, fine_scale: int, trace: FlowTrace, cool_sum: float,
                f_con: str) -> VoidTerms:
    """Initial voids on the fine footprint, intermediate voids on flow snapshots.

    Areas are in coarse cells. The intermediate term uses the first snapshot
    that shows any void and ignores later ones.
    """
    if not trace.snapshots:
        raise ValueError("flow trace has no snapshots")
    count_init, fine_area = enclosed_voids(fine_mask)
    area_init = fine_area / float(fine_scale * fine_scale)
    count_med, area_med, gap_med = 0, 0.0, None
    for level, grid in trace.snapshots:
        n, a = enclosed_voids(grid.heights > THETA * level)
        if n:
            count_med, area_med, gap_med = n, float(a), level
            break

    def area_term(area):
        return weighting(f_con, min(area / cool_sum, 1.0))

    return VoidTerms(
        L_voidBin_init=1.0 if count_init else 0.0,
        L_voidArea_init=area_term(area_init),
        L_voidBin_med=1.0 if count_med else 0.0,
        L_voidArea_med=area_term(area_med),
        count_init=count_init,
        area_init=area_init,
        count_med=count_med,
        area_med=area_med,
        gap_med=gap_med,
    )


def _chain(trace_max: FlowTrace, trace_min: FlowTrace) -> FlowTrace:
    last = trace_max.snapshots[-1][0]
    extra = tuple(s for s in trace_min.snapshots if s[0] < last)
    return FlowTrace(trace_max.snapshots + extra, trace_min.final)


class Evaluator:
    """Evaluates paths against one product; product constants are computed once."""

    def __init__(self, product: Product, config: ObjectiveConfig = ObjectiveConfig(),
                 raster: RasterSettings = RasterSettings(), gap: GapSpec | None = None,
                 max_relax_iters: int = MAX_RELAX_ITERS):
        self.product = product
        self.config = config
        self.raster = raster
        self.gap = gap or product.gap
        self.max_relax_iters = max_relax_iters
        self.prepared = PreparedAreas.build(product.areas, config)
        self.required_volume = total_required_volume(product.areas, self.gap, product.cell_size)

    def path_for(self, points, frozen=None) -> DispensePath:
        """Path through ``points`` with the feedrate that dispenses the required volume."""
        return DispensePath(points, feedrate_for_path(points, self.required_volume), frozen)

    def _gap_terms(self, final, level):
        areas = self.product.areas
        cell_area = final.cell_area
        m_comp = normalize_compressed(final, level)
        offgrid_cells = final.offgrid_sink / (level * cell_area)
        l_cool, l_over, l_tab = coverage_loss(
            m_comp, areas, self.config, prepared=self.prepared, offgrid_cells=offgrid_cells
        )
        cs = self.prepared.cool_sum
        in_cool = float(np.sum(final.amounts * areas.cool))
        outside = float(np.sum(final.amounts * (1.0 - areas.cool))) + final.offgrid_sink
        return GapReport(
            gap=float(level),
            L_comp_cool=l_cool,
            L_comp_over=l_over,
            L_comp_tab=l_tab,
            coverage_fraction=float(np.sum(m_comp * areas.cool)) / cs,
            overflow_ratio=outside / in_cool if in_cool > 0 else float("inf"),
            taboo_violation_fraction=float(np.sum(m_comp * areas.tab)) / cs,
        )

    def evaluate(self, path: DispensePath, tolerance_mode: bool = False,
                 keep_trace: bool = False) -> EvaluationReport:
        product, config, gap = self.product, self.config, self.gap
        initial = rasterize_coarse(path, product.shape, product.cell_size, self.raster)
        fine = rasterize_fine(path, self.raster, product.shape)
        if tolerance_mode:
            trace_max, trace_min = compress_two_stage(initial, gap, self.max_relax_iters)
            trace = _chain(trace_max, trace_min)
            finals = [(gap.g_max, trace_max.final), (gap.g_min, trace_min.final)]
        else:
            trace = compress(initial, gap, gap.g_final, self.max_relax_iters)
            finals = [(gap.g_final, trace.final)]
        per_gap = [self._gap_terms(final, level) for level, final in finals]
        voids = void_losses(fine, self.raster.fine_scale, trace, self.prepared.cool_sum,
                            config.f_con)
        terms = {
            "L_comp_cool": sum(g.L_comp_cool for g in per_gap),
            "L_comp_over": sum(g.L_comp_over for g in per_gap),
            "L_comp_tab": sum(g.L_comp_tab for g in per_gap),
            "L_init_over": s_init(initial.amounts, product.areas.over, config.f_init,
                                  weights=self.prepared.init),
            "L_voidBin_init": voids.L_voidBin_init,
            "L_voidBin_med": voids.L_voidBin_med,
            "L_voidArea_init": voids.L_voidArea_init,
            "L_voidArea_med": voids.L_voidArea_med,
        }
        return EvaluationReport(
            total_loss=weighted_total(terms, config),
            **terms,
            coverage_fraction=per_gap[0].coverage_fraction,
            overflow_ratio=per_gap[-1].overflow_ratio,
            taboo_violation_fraction=per_gap[-1].taboo_violation_fraction,
            void_area_fraction=(voids.area_init + voids.area_med) / self.prepared.cool_sum,
            void_count_init=voids.count_init,
            void_count_med=voids.count_med,
            void_med_gap=voids.gap_med,
            coverage_strategy="S-con" if config.f_area == "con" else "S-area",
            feedrate=path.feedrate,
            tolerance_mode=tolerance_mode,
            per_gap=tuple(per_gap) if tolerance_mode else (),
            trace=trace if keep_trace else None,
        )


def total_loss(path: DispensePath, product: Product, config: ObjectiveConfig = ObjectiveConfig(),
               gap: GapSpec | None = None, tolerance_mode: bool = False,
               raster: RasterSettings = RasterSettings(),
               keep_trace: bool = False) -> EvaluationReport:
    """Evaluate one path with its own feedrate; see :class:`Evaluator`."""
    return Evaluator(product, config, raster, gap).evaluate(path, tolerance_mode, keep_trace)
