"""Dispense-path search: CMA-ES trials over path point coordinates, and feedrate calibration."""

from __future__ import annotations

import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cmaes import CMAES, default_population_size
from .flow import FlowConvergenceError, compress, normalize_compressed
from .model import (
    DispensePath,
    EvaluationReport,
    GapSpec,
    ObjectiveConfig,
    Product,
    ValidationError,
    total_required_volume,
)
from .objective import Evaluator
from .raster import RasterSettings, rasterize_coarse

MAX_SEGMENTS = 10


@dataclass(frozen=True)
class CmaesConfig:
    """Search settings. ``sigma0=None`` means a quarter of the grid width."""

    population_size: int | None = None
    sigma0: float | None = None
    max_iterations: int = 1000
    seed: int = 0
    restart_count: int = 0
    tolfun: float = 1e-12
    tolx: float = 1e-12

    def __post_init__(self):
        if self.population_size is not None and self.population_size < 2:
            raise ValidationError("population_size must be >= 2")
        if self.sigma0 is not None and not (math.isfinite(self.sigma0) and self.sigma0 > 0):
            raise ValidationError("sigma0 must be > 0")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.restart_count < 0:
            raise ValidationError("restart_count must be >= 0")


@dataclass(frozen=True, eq=False)
class TrialResult:
    """Outcome of one seeded optimization run.

    A failed trial keeps ``best_path`` and ``best_report`` as None and the
    diagnostics in ``error``.
    """

    best_path: DispensePath | None
    best_report: EvaluationReport | None
    loss_history: tuple[float, ...]
    evaluations: int
    seed: int
    n_segments: int
    iterations: int = 0
    stop_reason: str = ""
    error: str | None = None
    index: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None

    def __eq__(self, other):
        if not isinstance(other, TrialResult):
            return NotImplemented
        return (
            self.best_path == other.best_path
            and self.best_report == other.best_report
            and self.loss_history == other.loss_history
            and (self.evaluations, self.seed, self.n_segments, self.iterations,
                 self.stop_reason, self.error, self.index)
            == (other.evaluations, other.seed, other.n_segments, other.iterations,
                other.stop_reason, other.error, other.index)
        )


def cooling_centroid(product: Product) -> np.ndarray:
    """Mass centre of the cooling mask as (x, y) in grid units."""
    cool = product.areas.cool
    rows, cols = np.indices(cool.shape)
    total = cool.sum()
    x = float(((cols + 0.5) * cool).sum() / total) * product.cell_size
    y = float(((rows + 0.5) * cool).sum() / total) * product.cell_size
    return np.array([x, y])


def _template(product: Product, n_segments: int, frozen_path: DispensePath | None):
    if frozen_path is not None:
        return np.array(frozen_path.points), np.array(frozen_path.frozen)
    if not (isinstance(n_segments, (int, np.integer)) and 1 <= n_segments <= MAX_SEGMENTS):
        raise ValidationError(f"n_segments must be an integer in [1, {MAX_SEGMENTS}]")
    n_points = int(n_segments) + 1
    points = np.tile(cooling_centroid(product), (n_points, 1))
    return points, np.zeros(points.shape, bool)


def optimize(
    product: Product,
    config: ObjectiveConfig = ObjectiveConfig(),
    gap: GapSpec | None = None,
    n_segments: int = 5,
    cmaes: CmaesConfig = CmaesConfig(),
    raster: RasterSettings = RasterSettings(),
    tolerance_mode: bool = False,
    frozen_path: DispensePath | None = None,
    index: int = 0,
) -> TrialResult:
    """Minimize the total loss over the free path coordinates.

    Free coordinates start at the cooling-area centroid plus unit Gaussian
    jitter; frozen coordinates of ``frozen_path`` are never searched and keep
    their exact values. Every candidate gets the feedrate that dispenses the
    required volume. Each restart begins from a fresh jitter.
    """
    points0, frozen = _template(product, n_segments, frozen_path)
    n_seg = len(points0) - 1
    free = ~frozen
    if not free.any():
        raise ValidationError("every coordinate is frozen; nothing to optimize")
    ev = Evaluator(product, config, raster, gap)
    rng = np.random.default_rng(cmaes.seed)
    sigma0 = cmaes.sigma0 if cmaes.sigma0 is not None else product.width * product.cell_size / 4
    n_free = int(free.sum())
    lam = cmaes.population_size or default_population_size(n_free)

    best = (math.inf, None, None)
    history: list[float] = []
    evaluations = 0
    stop = ""

    def candidate_path(x):
        pts = points0.copy()
        pts[free] = x
        return ev.path_for(pts, frozen)

    for _restart in range(cmaes.restart_count + 1):
        x0 = points0[free] + rng.standard_normal(n_free)
        es = CMAES(x0, sigma0, rng, lam)
        recent: list[float] = []
        window = 10 + int(math.ceil(30 * n_free / lam))
        stop = "max_iterations"
        for _ in range(cmaes.max_iterations):
            X = es.ask()
            losses = np.empty(len(X))
            for k, x in enumerate(X):
                path = candidate_path(x)
                report = ev.evaluate(path, tolerance_mode)
                losses[k] = report.total_loss
                if report.total_loss < best[0]:
                    best = (report.total_loss, path, report)
            evaluations += len(X)
            history.append(float(losses.min()))
            recent.append(float(losses.min()))
            es.tell(X, losses)
            recent = recent[-window:]
            if (len(recent) == window and max(recent) - min(recent) < cmaes.tolfun
                    and np.ptp(losses) < cmaes.tolfun):
                stop = "tolfun"
                break
            if es.sigma * float(np.sqrt(np.max(np.diag(es.C)))) < cmaes.tolx:
                stop = "tolx"
                break

    return TrialResult(
        best_path=best[1],
        best_report=best[2],
        loss_history=tuple(history),
        evaluations=evaluations,
        seed=cmaes.seed,
        n_segments=n_seg,
        iterations=len(history),
        stop_reason=stop,
        index=index,
    )


@dataclass(frozen=True)
class TrialSpec:
    """Everything a worker needs to run one trial."""

    product: Product
    config: ObjectiveConfig
    gap: GapSpec | None
    n_segments: int
    cmaes: CmaesConfig
    raster: RasterSettings
    tolerance_mode: bool
    index: int
    frozen_path: DispensePath | None = None


def run_trial(spec: TrialSpec) -> TrialResult:
    """Run one trial; failures come back as a TrialResult carrying the traceback."""
    try:
        return optimize(spec.product, spec.config, spec.gap, spec.n_segments, spec.cmaes,
                        spec.raster, spec.tolerance_mode, spec.frozen_path, spec.index)
    except (FlowConvergenceError, ValidationError, ArithmeticError, ValueError) as exc:
        return TrialResult(None, None, (), 0, spec.cmaes.seed, spec.n_segments,
                           error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}",
                           index=spec.index)


def trial_specs(
    product: Product,
    config: ObjectiveConfig,
    gap: GapSpec | None,
    segment_range: tuple[int, int],
    n_trials: int,
    cmaes: CmaesConfig = CmaesConfig(),
    raster: RasterSettings = RasterSettings(),
    tolerance_mode: bool = False,
    start: int = 0,
) -> list[TrialSpec]:
    """Trial ``i`` uses seed ``cmaes.seed + i`` and cycles through the segment range."""
    if n_trials < 1:
        raise ValidationError("n_trials must be >= 1")
    lo, hi = segment_range
    if not 1 <= lo <= hi <= MAX_SEGMENTS:
        raise ValidationError(f"segment range must satisfy 1 <= lo <= hi <= {MAX_SEGMENTS}")
    segments = list(range(lo, hi + 1))
    from dataclasses import replace

    return [
        TrialSpec(product, config, gap, segments[i % len(segments)],
                  replace(cmaes, seed=cmaes.seed + i), raster, tolerance_mode, i)
        for i in range(start, start + n_trials)
    ]


def sort_key(result: TrialResult):
    """Coverage descending, then loss ascending; failed trials last."""
    if result.best_report is None:
        return (1, 0.0, 0.0, result.index)
    r = result.best_report
    return (0, -r.coverage_fraction, r.total_loss, result.index)


def rank_trials(results) -> list[TrialResult]:
    return sorted(results, key=sort_key)


def execute(specs: list[TrialSpec], parallelism: int = 1, on_result=None) -> list[TrialResult]:
    """Run trial specs, serially or on a process pool, in spec order.

    ``on_result`` is called with every finished result, e.g. to persist it.
    """
    results = []
    if parallelism <= 1 or len(specs) <= 1:
        for spec in specs:
            res = run_trial(spec)
            if on_result is not None:
                on_result(res)
            results.append(res)
        return results
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        for res in pool.map(run_trial, specs):
            if on_result is not None:
                on_result(res)
            results.append(res)
    return results


def run_trials(
    product: Product,
    config: ObjectiveConfig = ObjectiveConfig(),
    gap: GapSpec | None = None,
    segment_range: tuple[int, int] = (5, 10),
    n_trials: int = 1,
    parallelism: int = 1,
    cmaes: CmaesConfig = CmaesConfig(),
    raster: RasterSettings = RasterSettings(),
    tolerance_mode: bool = False,
    on_result=None,
) -> list[TrialResult]:
    """Independent seeded trials, ranked by coverage then loss."""
    specs = trial_specs(product, config, gap, segment_range, n_trials, cmaes, raster,
                        tolerance_mode)
    return rank_trials(execute(specs, parallelism, on_result))


def coverage_at_volume(path: DispensePath, product: Product, gap: GapSpec, volume: float,
                       raster: RasterSettings = RasterSettings()) -> float:
    """Cooling coverage at g_final when ``path`` dispenses ``volume`` in total."""
    if volume <= 0:
        return 0.0
    p = path.with_feedrate(volume / path.length)
    initial = rasterize_coarse(p, product.shape, product.cell_size, raster)
    final = compress(initial, gap, gap.g_final).final
    m_comp = normalize_compressed(final, gap.g_final)
    cool = product.areas.cool
    return float(np.sum(m_comp * cool) / cool.sum())


@dataclass(frozen=True)
class Calibration:
    feedrate: float
    volume: float
    coverage: float
    steps: int = field(default=0, compare=False)


def calibrate_amount(
    path: DispensePath,
    product: Product,
    gap: GapSpec | None = None,
    target_coverage: float = 1.0,
    raster: RasterSettings = RasterSettings(),
    tol: float = 0.002,
    max_steps: int = 60,
) -> Calibration:
    """Bisect the dispensed volume until coverage at g_final is within ``tol`` of the target.

    The search is bounded by four times the required volume.
    """
    if not 0 < target_coverage <= 1:
        raise ValidationError("target_coverage must be in (0, 1]")
    if not path.length > 0:
        raise ValidationError("zero-length path: cannot calibrate")
    gap = gap or product.gap
    hi = 4.0 * total_required_volume(product.areas, gap, product.cell_size)
    cov_hi = coverage_at_volume(path, product, gap, hi, raster)
    if cov_hi < target_coverage - tol:
        raise ValidationError(
            f"target coverage {target_coverage:.4f} unreachable: "
            f"{cov_hi:.4f} at four times the required volume"
        )
    lo = 0.0
    if abs(cov_hi - target_coverage) <= tol:
        vol, cov, steps = hi, cov_hi, 0
    else:
        vol, cov = hi, cov_hi
        for steps in range(1, max_steps + 1):
            vol = 0.5 * (lo + hi)
            cov = coverage_at_volume(path, product, gap, vol, raster)
            if abs(cov - target_coverage) <= tol:
                break
            if cov < target_coverage:
                lo = vol
            else:
                hi = vol
        else:
            raise ValidationError(
                f"calibration did not reach coverage {target_coverage:.4f} +/- {tol}"
            )
    return Calibration(vol / path.length, vol, cov, steps)
