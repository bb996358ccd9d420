"""Discretize a dispense path into a material grid (coarse) or a bead footprint (fine).

Each segment deposits a top-hat bead: the rectangle swept by a cross-section of
``bead_width`` moving along the segment centerline, with uniform areal density
``feedrate / bead_width``. Cell amounts are the exact rectangle/cell
intersection areas, so the deposited total equals ``feedrate * length`` up to
rounding. Consecutive segments overlap on the inside of corners and the
overlap accumulates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .model import DispensePath, MaterialGrid, ValidationError

# intersections below this area (grid units squared) count as touching, not overlapping
AREA_EPS = 1e-12


@dataclass(frozen=True)
class RasterSettings:
    fine_scale: int = 20
    bead_width: float = 1.0

    def __post_init__(self):
        if int(self.fine_scale) != self.fine_scale or self.fine_scale < 1:
            raise ValidationError("fine_scale must be an integer >= 1")
        if not (math.isfinite(self.bead_width) and self.bead_width > 0):
            raise ValidationError("bead_width must be > 0")


@numba.njit(cache=True)
def _clip(xs, ys, n, a, b, c, out_x, out_y):
    # keep the part of polygon (xs, ys)[:n] with a*x + b*y <= c
    m = 0
    if n == 0:
        return 0
    px = xs[n - 1]
    py = ys[n - 1]
    pin = a * px + b * py <= c
    for i in range(n):
        qx = xs[i]
        qy = ys[i]
        qin = a * qx + b * qy <= c
        if qin != pin:
            dp = a * px + b * py - c
            dq = a * qx + b * qy - c
            t = dp / (dp - dq)
            out_x[m] = px + t * (qx - px)
            out_y[m] = py + t * (qy - py)
            m += 1
        if qin:
            out_x[m] = qx
            out_y[m] = qy
            m += 1
        px = qx
        py = qy
        pin = qin
    return m


@numba.njit(cache=True)
def _area(xs, ys, n):
    s = 0.0
    for i in range(n):
        j = i + 1 if i + 1 < n else 0
        s += xs[i] * ys[j] - xs[j] * ys[i]
    return 0.5 * abs(s)


@numba.njit(cache=True)
def _segment_rect(x0, y0, x1, y1, hw, rx, ry):
    dx = x1 - x0
    dy = y1 - y0
    length = math.sqrt(dx * dx + dy * dy)
    nx = -dy / length * hw
    ny = dx / length * hw
    rx[0] = x0 + nx
    ry[0] = y0 + ny
    rx[1] = x1 + nx
    ry[1] = y1 + ny
    rx[2] = x1 - nx
    ry[2] = y1 - ny
    rx[3] = x0 - nx
    ry[3] = y0 - ny
    return length


@numba.njit(cache=True)
def _deposit(points, feedrate, bead_width, out):
    """Add every segment's bead into ``out``; returns the volume landing on the grid."""
    H, W = out.shape
    hw = 0.5 * bead_width
    density = feedrate / bead_width
    rx = np.empty(4)
    ry = np.empty(4)
    ax = np.empty(16)
    ay = np.empty(16)
    bx = np.empty(16)
    by = np.empty(16)
    cx = np.empty(16)
    cy = np.empty(16)
    on_grid = 0.0
    for s in range(points.shape[0] - 1):
        x0, y0 = points[s, 0], points[s, 1]
        x1, y1 = points[s + 1, 0], points[s + 1, 1]
        if x0 == x1 and y0 == y1:
            continue
        _segment_rect(x0, y0, x1, y1, hw, rx, ry)
        r_lo = max(0, int(math.floor(min(ry[0], ry[1], ry[2], ry[3]))))
        r_hi = min(H - 1, int(math.ceil(max(ry[0], ry[1], ry[2], ry[3]))) - 1)
        for r in range(r_lo, r_hi + 1):
            n = _clip(rx, ry, 4, 0.0, -1.0, -float(r), ax, ay)
            n = _clip(ax, ay, n, 0.0, 1.0, float(r + 1), bx, by)
            if n < 3 or _area(bx, by, n) <= AREA_EPS:
                continue
            xmin = bx[0]
            xmax = bx[0]
            for k in range(1, n):
                xmin = min(xmin, bx[k])
                xmax = max(xmax, bx[k])
            c_lo = max(0, int(math.floor(xmin)))
            c_hi = min(W - 1, int(math.ceil(xmax)) - 1)
            for c in range(c_lo, c_hi + 1):
                m = _clip(bx, by, n, -1.0, 0.0, -float(c), ax, ay)
                m = _clip(ax, ay, m, 1.0, 0.0, float(c + 1), cx, cy)
                if m < 3:
                    continue
                a = _area(cx, cy, m)
                if a > AREA_EPS:
                    v = density * a
                    out[r, c] += v
                    on_grid += v
    return on_grid


@numba.njit(cache=True)
def _footprint(points, scale, bead_width, out):
    H, W = out.shape
    hw = 0.5 * bead_width * scale
    rx = np.empty(4)
    ry = np.empty(4)
    ax = np.empty(16)
    ay = np.empty(16)
    bx = np.empty(16)
    by = np.empty(16)
    for s in range(points.shape[0] - 1):
        x0, y0 = points[s, 0] * scale, points[s, 1] * scale
        x1, y1 = points[s + 1, 0] * scale, points[s + 1, 1] * scale
        if x0 == x1 and y0 == y1:
            continue
        _segment_rect(x0, y0, x1, y1, hw, rx, ry)
        r_lo = max(0, int(math.floor(min(ry[0], ry[1], ry[2], ry[3]))))
        r_hi = min(H - 1, int(math.ceil(max(ry[0], ry[1], ry[2], ry[3]))) - 1)
        for r in range(r_lo, r_hi + 1):
            n = _clip(rx, ry, 4, 0.0, -1.0, -float(r), ax, ay)
            n = _clip(ax, ay, n, 0.0, 1.0, float(r + 1), bx, by)
            if n < 3 or _area(bx, by, n) <= AREA_EPS:
                continue
            xmin = bx[0]
            xmax = bx[0]
            for k in range(1, n):
                xmin = min(xmin, bx[k])
                xmax = max(xmax, bx[k])
            c_lo = max(0, int(math.floor(xmin)))
            c_hi = min(W - 1, int(math.ceil(xmax)) - 1)
            for c in range(c_lo, c_hi + 1):
                out[r, c] = True


def rasterize_coarse(
    path: DispensePath,
    shape: tuple[int, int] = (50, 50),
    cell_size: float = 1.0,
    settings: RasterSettings = RasterSettings(),
) -> MaterialGrid:
    """Initial material distribution of ``path`` on a ``shape`` = (height, width) grid.

    Volume that falls outside the grid is routed to ``offgrid_sink``.
    """
    out = np.zeros(shape)
    if path.feedrate == 0.0:
        return MaterialGrid(out, cell_size)
    on_grid = _deposit(np.ascontiguousarray(path.points), path.feedrate, settings.bead_width, out)
    sink = max(path.feedrate * path.length - on_grid, 0.0)
    return MaterialGrid(out, cell_size, sink)


def rasterize_fine(
    path: DispensePath,
    settings: RasterSettings = RasterSettings(),
    shape: tuple[int, int] = (50, 50),
) -> np.ndarray:
    """Boolean bead footprint at ``fine_scale`` times the coarse resolution.

    A pixel is set when the bead overlaps it with positive area.
    """
    s = settings.fine_scale
    out = np.zeros((shape[0] * s, shape[1] * s), dtype=np.bool_)
    _footprint(np.ascontiguousarray(path.points, dtype=float), float(s), settings.bead_width, out)
    return out


def polyline_pixels(points, shape: tuple[int, int], scale: int, width_px: float = 1.0) -> np.ndarray:
    """Pixels crossed by a thin polyline drawn at ``scale`` pixels per grid unit."""
    out = np.zeros(shape, dtype=np.bool_)
    pts = np.ascontiguousarray(points, dtype=float)
    _footprint(pts, float(scale), width_px / scale, out)
    return out
