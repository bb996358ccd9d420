"""Slow, obviously-correct reference implementations used by the tests."""

from collections import deque

import numpy as np


def brute_edt(mask):
    """Distance from every cell centre to the nearest set cell centre, by exhaustive scan."""
    mask = np.asarray(mask, bool)
    pts = np.argwhere(mask)
    rows, cols = np.indices(mask.shape)
    d2 = (rows[..., None] - pts[:, 0]) ** 2 + (cols[..., None] - pts[:, 1]) ** 2
    return np.sqrt(d2.min(axis=-1))


def _neighbours(connectivity):
    steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if connectivity == 8:
        steps += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    return steps


def flood_components(mask, connectivity=8):
    """Breadth-first labelling; returns (labels, sorted component areas)."""
    mask = np.asarray(mask, bool)
    h, w = mask.shape
    labels = np.zeros((h, w), int)
    areas = []
    for i in range(h):
        for j in range(w):
            if not mask[i, j] or labels[i, j]:
                continue
            lab = len(areas) + 1
            labels[i, j] = lab
            queue = deque([(i, j)])
            n = 0
            while queue:
                a, b = queue.popleft()
                n += 1
                for da, db in _neighbours(connectivity):
                    x, y = a + da, b + db
                    if 0 <= x < h and 0 <= y < w and mask[x, y] and not labels[x, y]:
                        labels[x, y] = lab
                        queue.append((x, y))
            areas.append(n)
    return labels, sorted(areas)


def flood_voids(occupancy):
    """Void count and area: 4-connected empty components of the padded grid, minus the outside."""
    occ = np.pad(np.asarray(occupancy, bool), 1)
    labels, _ = flood_components(~occ, 4)
    outside = labels[0, 0]
    inner = labels[1:-1, 1:-1]
    ids = set(np.unique(inner[(inner > 0) & (inner != outside)]).tolist())
    area = int(sum((inner == k).sum() for k in ids))
    return len(ids), area


def same_partition(a, b):
    """Two label maps describe the same partition (labels up to permutation)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if not np.array_equal(a == 0, b == 0):
        return False
    pairs = set(zip(a[a > 0].tolist(), b[b > 0].tolist()))
    return len(pairs) == len({p[0] for p in pairs}) == len({p[1] for p in pairs})


def shapely_raster(points, feedrate, bead_width, shape):
    """Cell amounts from polygon intersections computed by shapely."""
    from shapely.geometry import LineString, box

    out = np.zeros(shape)
    hw = bead_width / 2
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        if x0 == x1 and y0 == y1:
            continue
        seg = LineString([(x0, y0), (x1, y1)])
        rect = seg.buffer(hw, cap_style="flat")
        density = feedrate / bead_width
        for r in range(shape[0]):
            for c in range(shape[1]):
                a = rect.intersection(box(c, r, c + 1, r + 1)).area
                if a > 1e-12:
                    out[r, c] += density * a
    return out


def reference_relax_step(vol, area, level, order):
    """One synchronous relaxation step visiting source cells in ``order``."""
    h, w = vol.shape
    cap = level * area
    new = np.minimum(vol, cap).astype(float)
    sink = 0.0
    for i, j in order:
        v = vol[i, j]
        if v <= cap:
            continue
        hgt = v / area
        nbrs = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
        diffs = []
        for a, b in nbrs:
            hn = vol[a, b] / area if 0 <= a < h and 0 <= b < w else 0.0
            diffs.append(max(hgt - hn, 0.0))
        total = sum(diffs)
        e = v - cap
        for (a, b), d in zip(nbrs, diffs):
            share = e * (d / total) if total > 0 else 0.25 * e
            if 0 <= a < h and 0 <= b < w:
                new[a, b] += share
            else:
                sink += share
    return new, sink
