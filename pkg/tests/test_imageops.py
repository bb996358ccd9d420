import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from timpath.imageops import (
    connected_components,
    distance_to_outside,
    distance_transform,
    enclosed_voids,
)

from oracles import brute_edt, flood_components, flood_voids, same_partition

masks = arrays(np.bool_, st.tuples(st.integers(1, 16), st.integers(1, 16)))


def test_distance_from_single_centre_cell():
    m = np.zeros((3, 3), bool)
    m[1, 1] = True
    r2 = math.sqrt(2)
    np.testing.assert_allclose(distance_transform(m), [[r2, 1, r2], [1, 0, 1], [r2, 1, r2]])


@pytest.mark.parametrize("seed", range(200))
def test_distance_matches_exhaustive_scan(seed):
    rng = np.random.default_rng(seed)
    shape = tuple(rng.integers(1, 24, size=2))
    m = rng.random(shape) < rng.uniform(0.01, 0.5)
    m[tuple(rng.integers(0, s) for s in shape)] = True
    np.testing.assert_allclose(distance_transform(m), brute_edt(m), rtol=1e-12, atol=1e-12)


def test_distance_of_full_mask_is_zero():
    assert not distance_transform(np.ones((4, 5), bool)).any()


def test_distance_of_empty_mask_raises():
    with pytest.raises(ValueError):
        distance_transform(np.zeros((4, 4), bool))


def test_distance_to_outside_counts_inside_cells_only():
    m = np.zeros((7, 7), bool)
    m[1:6, 1:6] = True
    d = distance_to_outside(m)
    assert d[3, 3] == 3.0 and d[1, 1] == 1.0 and d[0, 0] == 0.0
    with pytest.raises(ValueError):
        distance_to_outside(np.ones((3, 3), bool))


def test_two_separate_blocks():
    m = np.zeros((6, 6), bool)
    m[0:2, 0:2] = True
    m[3:5, 3:5] = True
    cc = connected_components(m, 8)
    assert cc.component_count == 2
    assert sorted(cc.component_areas[1:].tolist()) == [4, 4]
    assert cc.component_areas.sum() == 36


def test_diagonal_touch_depends_on_connectivity():
    m = np.eye(4, dtype=bool)
    assert connected_components(m, 8).component_count == 1
    assert connected_components(m, 4).component_count == 4


@given(masks, st.sampled_from([4, 8]))
def test_labels_match_flood_fill(m, conn):
    cc = connected_components(m, conn)
    labels, areas = flood_components(m, conn)
    assert cc.component_count == len(areas)
    assert sorted(cc.component_areas[1:].tolist()) == areas
    assert same_partition(cc.label_map, labels)


@given(masks, st.sampled_from([4, 8]))
def test_component_areas_survive_rotation(m, conn):
    a = connected_components(m, conn)
    b = connected_components(np.rot90(m), conn)
    assert sorted(a.component_areas.tolist()) == sorted(b.component_areas.tolist())


def test_bad_connectivity():
    with pytest.raises(ValueError):
        connected_components(np.ones((2, 2), bool), 6)


def _ring(n, inner):
    m = np.zeros((n, n), bool)
    m[1:-1, 1:-1] = True
    m[inner:-inner, inner:-inner] = False
    return m


def test_ring_encloses_its_hole():
    assert enclosed_voids(_ring(10, 3)) == (1, 16)


def test_nested_rings():
    m = _ring(14, 3)
    m[5:9, 5:9] = True
    m[6:8, 6:8] = False
    # the hole between the rings and the centre hole
    assert enclosed_voids(m) == (2, 8 * 8 - 16 + 4)


def test_bar_and_open_ring_have_no_voids():
    bar = np.zeros((8, 8), bool)
    bar[3, :] = True
    assert enclosed_voids(bar) == (0, 0)
    opened = _ring(10, 3)
    opened[4, 1:3] = False
    assert enclosed_voids(opened) == (0, 0)


def test_diagonal_gap_does_not_leak():
    # empty cells connect only through edges, so a diagonal wall still seals
    m = np.zeros((5, 5), bool)
    m[0, 2] = m[1, 1] = m[1, 3] = m[2, 0] = m[2, 4] = True
    m[3, 1] = m[3, 3] = m[4, 2] = True
    assert enclosed_voids(m) == (1, 5)


def test_empty_occupancy():
    assert enclosed_voids(np.zeros((5, 5), bool)) == (0, 0)


@given(masks)
def test_voids_match_padded_flood_fill(m):
    assert enclosed_voids(m) == flood_voids(m)


@pytest.mark.parametrize("seed", range(40))
def test_voids_match_flood_fill_on_dense_masks(seed):
    rng = np.random.default_rng(seed)
    m = rng.random((30, 30)) < rng.uniform(0.4, 0.8)
    assert enclosed_voids(m) == flood_voids(m)
