"""Hyperparameter sweep over objective configurations.

For each configuration a batch of independent trials is run and condensed
into a :class:`SweepRow`: the mean cooling coverage, the share of trials
that meet all convergence conditions, and the mean of the two.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import formats
from .model import ObjectiveConfig, Product, ValidationError
from .optimizer import CmaesConfig, TrialResult, execute, trial_specs
from .raster import RasterSettings
from .store import RunStore

WEIGHT_LEVELS = (0.0, 10.0, 100.0, 1000.0, 10000.0)
SWEPT_WEIGHTS = ("w_comp_tab", "w_voidArea", "w_voidBin", "w_init_over")

MIN_COVERAGE = 0.80
MAX_TABOO = 0.01
MAX_VOID_AREA = 0.05


def meets_convergence(trial: TrialResult) -> bool:
    """Coverage >= 0.8, taboo violation <= 0.01 and void area <= 0.05 (of the cooling area)."""
    r = trial.best_report
    if r is None:
        return False
    return (
        r.coverage_fraction >= MIN_COVERAGE
        and r.taboo_violation_fraction <= MAX_TABOO
        and r.void_area_fraction <= MAX_VOID_AREA
    )


@dataclass(frozen=True)
class SweepConfig:
    configs: tuple[ObjectiveConfig, ...]
    runs_per_config: int = 100
    segment_range: tuple[int, int] = (5, 10)
    iterations: int = 1000
    seed: int = 0
    tolerance_mode: bool = False

    def __post_init__(self):
        if not self.configs:
            raise ValidationError("a sweep needs at least one configuration")
        if self.runs_per_config < 1 or self.iterations < 1:
            raise ValidationError("runs_per_config and iterations must be >= 1")
        for k, cfg in enumerate(self.configs):
            for name in SWEPT_WEIGHTS:
                if getattr(cfg, name) not in WEIGHT_LEVELS:
                    raise ValidationError(
                        f"config {k}: {name}={getattr(cfg, name)} is not one of {WEIGHT_LEVELS}"
                    )


@dataclass(frozen=True)
class SweepRow:
    config: ObjectiveConfig
    coverage_ratio: float
    convergence_ratio: float
    average_performance: float
    runs: int
    failures: int = 0
    converged: tuple[int, ...] = field(default=(), compare=False)


def row_from_trials(config: ObjectiveConfig, trials: list[TrialResult]) -> SweepRow:
    """Condense trials (in index order) into a row; failed trials count as not converged."""
    trials = sorted(trials, key=lambda t: t.index)
    ok = [t for t in trials if t.best_report is not None]
    coverage = math.fsum(t.best_report.coverage_fraction for t in ok) / len(ok) if ok else 0.0
    converged = tuple(t.index for t in trials if meets_convergence(t))
    convergence = len(converged) / len(trials) if trials else 0.0
    return SweepRow(config, coverage, convergence, (coverage + convergence) / 2,
                    len(trials), len(trials) - len(ok), converged)


def run_sweep(
    product: Product,
    sweep: SweepConfig,
    parallelism: int = 1,
    out_dir=None,
    raster: RasterSettings = RasterSettings(),
    cmaes: CmaesConfig = CmaesConfig(),
    on_row=None,
) -> list[SweepRow]:
    """Run every configuration with the same trial seeds, one after another.

    With ``out_dir`` each configuration's trials go to their own run
    directory ``config-KKK``.
    """
    from dataclasses import replace

    search = replace(cmaes, max_iterations=sweep.iterations, seed=sweep.seed)
    rows = []
    for k, config in enumerate(sweep.configs):
        on_result = None
        if out_dir is not None:
            store = RunStore.create(Path(out_dir) / f"config-{k:03d}", {
                "product": product.name,
                "config": formats.config_to_doc(config),
                "cmaes": formats.cmaes_to_dict(search),
                "segments": list(sweep.segment_range),
                "tolerance_mode": sweep.tolerance_mode,
            })
            on_result = store.append
        specs = trial_specs(product, config, None, sweep.segment_range, sweep.runs_per_config,
                            search, raster, sweep.tolerance_mode)
        trials = execute(specs, parallelism, on_result)
        row = row_from_trials(config, trials)
        if on_row is not None:
            on_row(k, row)
        rows.append(row)
    return rows


def rows_from_store(out_dir, sweep: SweepConfig) -> list[SweepRow]:
    """Recompute the rows from persisted trials."""
    return [row_from_trials(cfg, RunStore(Path(out_dir) / f"config-{k:03d}").load_trials())
            for k, cfg in enumerate(sweep.configs)]


def sweep_to_doc(sweep: SweepConfig) -> dict:
    return {
        **formats.header("sweep"),
        "runs_per_config": sweep.runs_per_config,
        "segments": list(sweep.segment_range),
        "iterations": sweep.iterations,
        "seed": sweep.seed,
        "tolerance_mode": sweep.tolerance_mode,
        "configs": [asdict(c) for c in sweep.configs],
    }


def sweep_from_doc(doc: dict) -> SweepConfig:
    configs = doc.get("configs")
    if not isinstance(configs, list):
        raise ValidationError("sweep: 'configs' must be a list")
    segments = doc.get("segments", [5, 10])
    if not (isinstance(segments, list) and len(segments) == 2
            and all(isinstance(s, int) for s in segments)):
        raise ValidationError("sweep: 'segments' must be [lo, hi]")
    return SweepConfig(
        configs=tuple(ObjectiveConfig(**formats._config_values(c, f"configs[{k}]"))
                      for k, c in enumerate(configs)),
        runs_per_config=int(doc.get("runs_per_config", 100)),
        segment_range=(segments[0], segments[1]),
        iterations=int(doc.get("iterations", 1000)),
        seed=int(doc.get("seed", 0)),
        tolerance_mode=bool(doc.get("tolerance_mode", False)),
    )


def rows_to_doc(rows: list[SweepRow]) -> dict:
    return {
        **formats.header("sweep-result"),
        "rows": [
            {
                "config": asdict(r.config),
                "coverage_ratio": r.coverage_ratio,
                "convergence_ratio": r.convergence_ratio,
                "average_performance": r.average_performance,
                "runs": r.runs,
                "failures": r.failures,
                "converged": list(r.converged),
            }
            for r in rows
        ],
    }
