"""Heuristic compression of a dispensed material grid to decreasing gap heights.

The model only conserves volume: at each gap level every cell whose height
exceeds the level sheds the excess to its four von Neumann neighbours,
proportionally to the positive height difference (equally if no neighbour
is lower). All cells update synchronously from the pre-step state, and
shares that leave the grid go to the off-grid sink. Relaxation repeats
until no cell is above the level, then the next lower level starts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .imageops import _label
from .model import GapSpec, MaterialGrid

MAX_RELAX_ITERS = 10_000
REL_TOL = 1e-9
# residual excess, in cells' worth of capacity, below which a level is flushed
FLUSH_TOL = 0.05
# local steps per level before the remainder is flushed regardless
FLUSH_AFTER = 100


class FlowConvergenceError(RuntimeError):
    def __init__(self, level: float, iterations: int):
        super().__init__(
            f"flow relaxation did not converge at gap level {level:.6g} "
            f"after {iterations} iterations"
        )
        self.level = level
        self.iterations = iterations


@dataclass(frozen=True)
class FlowTrace:
    """Converged state after each gap level, highest level first."""

    snapshots: tuple[tuple[float, MaterialGrid], ...]
    final: MaterialGrid

    @property
    def gaps(self) -> list[float]:
        return [g for g, _ in self.snapshots]


@numba.njit(cache=True)
def _bbox_over(vol, cap, r0, r1, c0, c1):
    # bounding box, maximum and total excess of cells above cap within [r0..r1] x [c0..c1]
    r_lo, r_hi, c_lo, c_hi = vol.shape[0], -1, vol.shape[1], -1
    worst = 0.0
    excess = 0.0
    for i in range(r0, r1 + 1):
        for j in range(c0, c1 + 1):
            v = vol[i, j]
            if v > worst:
                worst = v
            if v > cap:
                excess += v - cap
                r_lo = min(r_lo, i)
                r_hi = max(r_hi, i)
                c_lo = min(c_lo, j)
                c_hi = max(c_hi, j)
    return r_lo, r_hi, c_lo, c_hi, worst, excess


@numba.njit(cache=True)
def _relax_step(vol, area, level, shares, r_lo, r_hi, c_lo, c_hi):
    """One synchronous relaxation step in place; returns volume sent off-grid.

    Every cell above ``level`` must lie inside rows ``r_lo..r_hi`` and
    columns ``c_lo..c_hi``.
    """
    H, W = vol.shape
    cap = level * area
    # shares[k, i, j]: volume cell (i, j) sends up, down, left, right
    for i in range(r_lo, r_hi + 1):
        for j in range(c_lo, c_hi + 1):
            v = vol[i, j]
            if v <= cap:
                shares[0, i, j] = 0.0
                shares[1, i, j] = 0.0
                shares[2, i, j] = 0.0
                shares[3, i, j] = 0.0
                continue
            h = v / area
            e = v - cap
            d0 = h - (vol[i - 1, j] / area if i > 0 else 0.0)
            d1 = h - (vol[i + 1, j] / area if i < H - 1 else 0.0)
            d2 = h - (vol[i, j - 1] / area if j > 0 else 0.0)
            d3 = h - (vol[i, j + 1] / area if j < W - 1 else 0.0)
            d0 = d0 if d0 > 0.0 else 0.0
            d1 = d1 if d1 > 0.0 else 0.0
            d2 = d2 if d2 > 0.0 else 0.0
            d3 = d3 if d3 > 0.0 else 0.0
            d = d0 + d1 + d2 + d3
            if d > 0.0:
                shares[0, i, j] = e * (d0 / d)
                shares[1, i, j] = e * (d1 / d)
                shares[2, i, j] = e * (d2 / d)
                shares[3, i, j] = e * (d3 / d)
            else:
                q = 0.25 * e
                shares[0, i, j] = q
                shares[1, i, j] = q
                shares[2, i, j] = q
                shares[3, i, j] = q
    sink = 0.0
    for i in range(r_lo, r_hi + 1):
        for j in range(c_lo, c_hi + 1):
            if i == 0:
                sink += shares[0, i, j]
            if i == H - 1:
                sink += shares[1, i, j]
            if j == 0:
                sink += shares[2, i, j]
            if j == W - 1:
                sink += shares[3, i, j]
    g_lo = max(r_lo - 1, 0)
    g_hi = min(r_hi + 1, H - 1)
    h_lo = max(c_lo - 1, 0)
    h_hi = min(c_hi + 1, W - 1)
    # gather in a fixed neighbour order so the result is traversal-independent
    for i in range(g_lo, g_hi + 1):
        for j in range(h_lo, h_hi + 1):
            v = vol[i, j]
            if v > cap:
                v = cap
            inflow = 0.0
            if r_lo <= i - 1 and i - 1 <= r_hi and c_lo <= j and j <= c_hi:
                inflow += shares[1, i - 1, j]
            if r_lo <= i + 1 and i + 1 <= r_hi and c_lo <= j and j <= c_hi:
                inflow += shares[0, i + 1, j]
            if r_lo <= i and i <= r_hi and c_lo <= j - 1 and j - 1 <= c_hi:
                inflow += shares[3, i, j - 1]
            if r_lo <= i and i <= r_hi and c_lo <= j + 1 and j + 1 <= c_hi:
                inflow += shares[2, i, j + 1]
            shares[4, i, j] = v + inflow
    for i in range(g_lo, g_hi + 1):
        for j in range(h_lo, h_hi + 1):
            vol[i, j] = shares[4, i, j]
    return sink


@numba.njit(cache=True)
def _flush(vol, cap):
    """Hand the excess of every 4-connected full region to its boundary.

    Each boundary edge of a region (towards a cell below ``cap`` or off the
    grid) receives an equal part of the region's excess; regions are
    re-formed until no cell is above ``cap``. Returns the off-grid volume.
    """
    H, W = vol.shape
    sink = 0.0
    full = np.zeros((H, W), dtype=np.bool_)
    for _ in range(H * W + 1):
        any_over = False
        for i in range(H):
            for j in range(W):
                full[i, j] = vol[i, j] >= cap
                if vol[i, j] > cap:
                    any_over = True
        if not any_over:
            return sink
        labels, _areas, n = _label(full, False)
        excess = np.zeros(n + 1)
        edges = np.zeros(n + 1)
        for i in range(H):
            for j in range(W):
                lab = labels[i, j]
                if lab == 0:
                    continue
                excess[lab] += vol[i, j] - cap
                edges[lab] += (
                    (i == 0 or not full[i - 1, j])
                    + (i == H - 1 or not full[i + 1, j])
                    + (j == 0 or not full[i, j - 1])
                    + (j == W - 1 or not full[i, j + 1])
                )
        for lab in range(1, n + 1):
            excess[lab] = excess[lab] / edges[lab] if edges[lab] > 0 else 0.0
        for i in range(H):
            for j in range(W):
                lab = labels[i, j]
                if lab == 0:
                    continue
                vol[i, j] = cap
                q = excess[lab]
                if q == 0.0:
                    continue
                if i == 0:
                    sink += q
                elif not full[i - 1, j]:
                    vol[i - 1, j] += q
                if i == H - 1:
                    sink += q
                elif not full[i + 1, j]:
                    vol[i + 1, j] += q
                if j == 0:
                    sink += q
                elif not full[i, j - 1]:
                    vol[i, j - 1] += q
                if j == W - 1:
                    sink += q
                elif not full[i, j + 1]:
                    vol[i, j + 1] += q
    return -1.0


@numba.njit(cache=True)
def _relax(vol, area, level, max_iters, rel_tol, flush_excess, flush_after):
    """Relax ``vol`` in place at ``level``.

    Returns (iterations, sink volume); iterations is -1 when the cap was hit.
    Once the total excess drops to ``flush_excess`` or below, or after
    ``flush_after`` steps (negative: never), the remainder is flushed.
    """
    H, W = vol.shape
    shares = np.zeros((5, H, W))
    cap = level * area
    limit = cap * (1.0 + rel_tol)
    r_lo, r_hi, c_lo, c_hi, worst, excess = _bbox_over(vol, cap, 0, H - 1, 0, W - 1)
    sink = 0.0
    it = 0
    while worst > limit:
        if excess <= flush_excess or (flush_after >= 0 and it >= flush_after):
            shed = _flush(vol, cap)
            if shed < 0.0:
                return -1, sink
            return it, sink + shed
        if it >= max_iters:
            return -1, sink
        sink += _relax_step(vol, area, level, shares, r_lo, r_hi, c_lo, c_hi)
        it += 1
        r_lo, r_hi, c_lo, c_hi, worst, excess = _bbox_over(
            vol, cap, max(r_lo - 1, 0), min(r_hi + 1, H - 1),
            max(c_lo - 1, 0), min(c_hi + 1, W - 1))
    return it, sink


def gap_schedule(max_height: float, target_gap: float, n_steps: int) -> np.ndarray:
    """Linearly spaced gap levels strictly below ``max_height`` ending at ``target_gap``."""
    if max_height <= target_gap:
        return np.array([float(target_gap)])
    levels = np.linspace(max_height, target_gap, int(n_steps) + 1)[1:]
    levels[-1] = target_gap
    return levels


def compress(
    initial: MaterialGrid,
    gap: GapSpec | int,
    target_gap: float,
    max_relax_iters: int = MAX_RELAX_ITERS,
    flush_tol: float = FLUSH_TOL,
    flush_after: int | None = FLUSH_AFTER,
) -> FlowTrace:
    """Compress ``initial`` down to ``target_gap`` through the linear gap schedule.

    ``gap`` supplies the number of levels (a bare int is accepted too).
    Local relaxation decays geometrically inside large full plateaus, so once
    a level's total excess is at most ``flush_tol`` cells' worth of capacity,
    or after ``flush_after`` local steps, the remainder is handed to the
    plateau boundaries in one exact step. ``flush_tol=0, flush_after=None``
    runs the local rule alone to full convergence.
    """
    if not target_gap > 0:
        raise ValueError("target_gap must be > 0")
    n_steps = gap if isinstance(gap, int) else gap.n_steps
    heights = initial.heights
    max_h = float(heights.max()) if heights.size else 0.0
    if max_h <= target_gap:
        return FlowTrace(((float(target_gap), initial),), initial)
    vol = np.array(initial.amounts, dtype=float)
    sink = initial.offgrid_sink
    area = initial.cell_area
    after = -1 if flush_after is None else int(flush_after)
    snapshots = []
    for level in gap_schedule(max_h, target_gap, n_steps):
        cap = float(level) * area
        it, shed = _relax(
            vol, area, float(level), int(max_relax_iters), REL_TOL, flush_tol * cap, after
        )
        sink += shed
        if it < 0:
            raise FlowConvergenceError(float(level), int(max_relax_iters))
        snapshots.append((float(level), MaterialGrid(vol.copy(), initial.cell_size, sink)))
    return FlowTrace(tuple(snapshots), snapshots[-1][1])


def compress_two_stage(
    initial: MaterialGrid,
    gap: GapSpec,
    max_relax_iters: int = MAX_RELAX_ITERS,
    flush_tol: float = FLUSH_TOL,
    flush_after: int | None = FLUSH_AFTER,
) -> tuple[FlowTrace, FlowTrace]:
    """Compress to g_max, then continue from that state down to g_min."""
    trace_max = compress(initial, gap, gap.g_max, max_relax_iters, flush_tol, flush_after)
    trace_min = compress(
        trace_max.final, gap, gap.g_min, max_relax_iters, flush_tol, flush_after
    )
    return trace_max, trace_min


def normalize_compressed(final: MaterialGrid, target_gap: float) -> np.ndarray:
    """Per-cell fill ratio ``min(height / target_gap, 1)``."""
    return np.minimum(final.heights / target_gap, 1.0)
