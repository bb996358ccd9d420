"""Grid image primitives: exact Euclidean distance transform and component labeling."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

_INF = 1e20


@numba.njit(cache=True)
def _edt_1d(f, n, d, v, z):
    # lower envelope of parabolas (Felzenszwalb & Huttenlocher), squared distances
    k = 0
    v[0] = 0
    z[0] = -_INF
    z[1] = _INF
    for q in range(1, n):
        if f[q] >= _INF:
            continue
        if f[v[0]] >= _INF:
            v[0] = q
            continue
        while True:
            p = v[k]
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p)
            if s <= z[k]:
                k -= 1
                if k < 0:
                    break
            else:
                break
        k += 1
        v[k] = q
        z[k] = s if k > 0 else -_INF
        z[k + 1] = _INF
    if f[v[0]] >= _INF:
        for q in range(n):
            d[q] = _INF
        return
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        p = v[k]
        d[q] = (q - p) * (q - p) + f[p]


@numba.njit(cache=True)
def _edt_squared(mask):
    H, W = mask.shape
    n = max(H, W)
    f = np.empty(n)
    d = np.empty(n)
    v = np.zeros(n, dtype=np.int64)
    z = np.empty(n + 1)
    out = np.empty((H, W))
    for j in range(W):
        for i in range(H):
            f[i] = 0.0 if mask[i, j] else _INF
        _edt_1d(f, H, d, v, z)
        for i in range(H):
            out[i, j] = d[i]
    for i in range(H):
        for j in range(W):
            f[j] = out[i, j]
        _edt_1d(f, W, d, v, z)
        for j in range(W):
            out[i, j] = d[j]
    return out


def distance_transform(mask) -> np.ndarray:
    """Euclidean distance from every cell centre to the nearest set cell centre."""
    mask = np.ascontiguousarray(np.asarray(mask, dtype=bool))
    if mask.ndim != 2:
        raise ValueError("mask must be 2D")
    if not mask.any():
        raise ValueError("distance transform of an empty mask is undefined")
    return np.sqrt(_edt_squared(mask))


def distance_to_outside(mask) -> np.ndarray:
    """Distance from each cell inside ``mask`` to the nearest cell outside it (0 outside).

    This is the convention of the usual image-library distance transform,
    which measures foreground pixels against the nearest background pixel.
    A mask that covers the whole grid has no outside and raises ``ValueError``.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.all():
        raise ValueError("mask covers the whole grid; distance to outside is undefined")
    return distance_transform(~mask)


@numba.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


@numba.njit(cache=True)
def _label(mask, eight):
    H, W = mask.shape
    labels = np.zeros((H, W), dtype=np.int64)
    parent = np.zeros(H * W // 2 + 2, dtype=np.int64)
    next_label = 1
    for i in range(H):
        for j in range(W):
            if not mask[i, j]:
                continue
            best = 0
            # already visited neighbours: W, N (and NW, NE for 8-connectivity)
            for di, dj in ((0, -1), (-1, 0), (-1, -1), (-1, 1)):
                if not eight and di != 0 and dj != 0:
                    continue
                ni = i + di
                nj = j + dj
                if ni < 0 or nj < 0 or nj >= W:
                    continue
                lab = labels[ni, nj]
                if lab == 0:
                    continue
                if best == 0:
                    best = lab
                else:
                    _union(parent, best, lab)
            if best == 0:
                if next_label >= parent.shape[0]:
                    grown = np.zeros(parent.shape[0] * 2, dtype=np.int64)
                    grown[: parent.shape[0]] = parent
                    parent = grown
                parent[next_label] = next_label
                best = next_label
                next_label += 1
            labels[i, j] = best
    # second pass: resolve roots and renumber in raster order of first appearance
    remap = np.zeros(next_label, dtype=np.int64)
    count = 0
    areas = np.zeros(next_label + 1, dtype=np.int64)
    for i in range(H):
        for j in range(W):
            lab = labels[i, j]
            if lab == 0:
                areas[0] += 1
                continue
            root = _find(parent, lab)
            if remap[root] == 0:
                count += 1
                remap[root] = count
            new = remap[root]
            labels[i, j] = new
            areas[new] += 1
    return labels, areas[: count + 1], count


@dataclass(frozen=True, eq=False)
class LabeledComponents:
    """Component id per cell (0 = unset cells) and the cell count of every id."""

    label_map: np.ndarray
    component_areas: np.ndarray
    component_count: int


def connected_components(mask, connectivity: int = 8) -> LabeledComponents:
    """Label maximal connected regions of set cells.

    ``component_areas[0]`` counts the unset cells, so the areas sum to the
    grid size.
    """
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    mask = np.ascontiguousarray(np.asarray(mask, dtype=np.bool_))
    labels, areas, count = _label(mask, connectivity == 8)
    return LabeledComponents(labels, areas, int(count))


@numba.njit(cache=True)
def _enclosed_runs(occ):
    # empty runs per row, unioned with overlapping empty runs of the previous row;
    # node 0 stands for the region outside the grid
    H, W = occ.shape
    # a row holds at most (W + 1) // 2 empty runs
    cap = H * ((W + 1) // 2)
    starts = np.empty(cap, dtype=np.int64)
    ends = np.empty(cap, dtype=np.int64)
    parent = np.empty(cap + 1, dtype=np.int64)
    parent[0] = 0
    n = 0
    prev_lo = 0
    prev_hi = 0
    for i in range(H):
        row_lo = n
        q = prev_lo
        j = 0
        while j < W:
            if occ[i, j]:
                j += 1
                continue
            k = j
            while k < W and not occ[i, k]:
                k += 1
            starts[n] = j
            ends[n] = k
            node = n + 1
            parent[node] = node
            if i == 0 or i == H - 1 or j == 0 or k == W:
                _union(parent, 0, node)
            # runs in a row are sorted, so one forward pointer suffices
            while q < prev_hi and ends[q] <= j:
                q += 1
            r = q
            while r < prev_hi and starts[r] < k:
                _union(parent, r + 1, node)
                r += 1
            n += 1
            j = k
        prev_lo = row_lo
        prev_hi = n
    seen = np.zeros(n + 1, dtype=np.bool_)
    count = 0
    area = 0
    for q in range(n):
        root = _find(parent, q + 1)
        if root == _find(parent, 0):
            continue
        area += ends[q] - starts[q]
        if not seen[root]:
            seen[root] = True
            count += 1
    return count, area


def enclosed_voids(occupancy) -> tuple[int, int]:
    """Count and total area of empty regions fully enclosed by ``occupancy``.

    Empty cells are 4-connected (material itself is 8-connected), and the
    grid is treated as surrounded by an empty border: every empty component
    that cannot reach that border is a void. Implemented on row runs, which
    is equivalent to labelling the padded complement cell by cell.
    """
    occ = np.asarray(occupancy, dtype=bool)
    if not occ.any():
        return 0, 0
    rows = np.flatnonzero(occ.any(axis=1))
    cols = np.flatnonzero(occ.any(axis=0))
    # cells outside the bounding box are empty and always reach the border
    window = np.ascontiguousarray(occ[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1])
    count, area = _enclosed_runs(window)
    return int(count), int(area)
