import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from timpath.model import (
    DispensePath,
    EvaluationReport,
    GapSpec,
    MaterialGrid,
    ObjectiveConfig,
    Product,
    TargetAreas,
    ValidationError,
    feedrate_for_path,
    polyline_length,
    total_required_volume,
    weighted_total,
)


def areas_with(cool_sum_cells=0, shape=(10, 10)):
    cool = np.zeros(shape)
    cool.flat[:cool_sum_cells] = 1.0
    return TargetAreas.from_cool_tab(cool)


def test_required_volume_is_cool_area_times_gap():
    assert total_required_volume(areas_with(100), GapSpec(0.5), 1.0) == 50.0


def test_required_volume_with_fractional_mask_and_cell_size():
    cool = np.full((5, 5), 0.5)
    assert cool.sum() == 12.5
    areas = TargetAreas.from_cool_tab(cool)
    assert total_required_volume(areas, GapSpec(1.0), 2.0) == 50.0


def test_empty_cooling_surface_is_rejected():
    with pytest.raises(ValidationError, match="empty cooling surface"):
        areas_with(0)


def test_mask_value_out_of_range_names_the_cell():
    cool = np.zeros((4, 4))
    cool[1, 1] = 1.0
    cool[2, 3] = 1.3
    with pytest.raises(ValidationError, match=r"row 2, col 3"):
        TargetAreas.from_cool_tab(cool)


def test_mask_shapes_must_agree():
    with pytest.raises(ValidationError, match="dimensions"):
        TargetAreas(np.ones((3, 3)), np.zeros((3, 4)), np.zeros((3, 3)))


@pytest.mark.parametrize(
    "points, volume, expected",
    [
        ([[0, 0], [10, 0]], 50.0, 5.0),
        ([[0, 0], [3, 0], [8, 0]], 4.0, 0.5),
        ([[0, 0], [3, 4]], 10.0, 2.0),
    ],
)
def test_feedrate_for_path(points, volume, expected):
    assert feedrate_for_path(points, volume) == pytest.approx(expected, rel=1e-15)


def test_degenerate_path_has_no_feedrate():
    with pytest.raises(ValidationError, match="zero-length"):
        feedrate_for_path([[2, 2], [2, 2], [2, 2]], 10.0)


@given(
    st.integers(1, 300),
    st.floats(0.1, 3.0),
    st.floats(0.1, 2.0),
    st.lists(st.tuples(st.floats(-20, 70), st.floats(-20, 70)), min_size=2, max_size=11),
)
def test_feedrate_dispenses_exactly_the_required_volume(n_cool, g, cell, pts):
    if polyline_length(pts) < 1e-6:
        return
    areas = areas_with(n_cool, (20, 20))
    volume = total_required_volume(areas, GapSpec(g), cell)
    path = DispensePath(pts, feedrate_for_path(pts, volume))
    assert math.isclose(path.volume, n_cool * cell * cell * g, rel_tol=1e-12)


def test_path_validation():
    with pytest.raises(ValidationError):
        DispensePath([[0, 0]])
    with pytest.raises(ValidationError):
        DispensePath([[0, 0], [1, 1]], feedrate=-1)
    with pytest.raises(ValidationError):
        DispensePath([[0, 0], [np.nan, 1]])
    with pytest.raises(ValidationError):
        DispensePath([[0, 0], [1, 1]], frozen=np.zeros((3, 2), bool))


def test_path_is_immutable():
    p = DispensePath([[0, 0], [1, 1]])
    with pytest.raises(ValueError):
        p.points[0, 0] = 5


def test_material_grid_invariants():
    with pytest.raises(ValidationError):
        MaterialGrid(np.array([[1.0, -0.1]]))
    with pytest.raises(ValidationError):
        MaterialGrid(np.zeros((2, 2)), offgrid_sink=-1)
    with pytest.raises(ValidationError):
        MaterialGrid(np.array([[np.inf]]))
    g = MaterialGrid(np.full((2, 3), 2.0), cell_size=2.0, offgrid_sink=1.5)
    assert (g.height, g.width) == (2, 3)
    assert g.total_volume == 13.5
    np.testing.assert_array_equal(g.heights, np.full((2, 3), 0.5))
    assert MaterialGrid.empty(4, 3).amounts.shape == (3, 4)


def test_gap_spec_defaults_and_ordering():
    g = GapSpec(1.0)
    assert (g.g_min, g.g_final, g.g_max) == (1.0, 1.0, 1.0)
    assert GapSpec(0.9, 1.0, 0.5).g_min == 0.5
    with pytest.raises(ValidationError):
        GapSpec(1.0, 0.8)
    with pytest.raises(ValidationError):
        GapSpec(1.0, n_steps=0)
    with pytest.raises(ValidationError):
        GapSpec(-1.0)


def test_config_selectors_are_restricted():
    with pytest.raises(ValidationError):
        ObjectiveConfig(f_con="squ")
    with pytest.raises(ValidationError):
        ObjectiveConfig(f_area="none")
    with pytest.raises(ValidationError):
        ObjectiveConfig(f_init="con")
    with pytest.raises(ValidationError):
        ObjectiveConfig(w_voidArea=-1)


def test_scaled_config_multiplies_weights_only():
    c = ObjectiveConfig(w_comp_cool=2, f_con="log").scaled(10)
    assert c.w_comp_cool == 20 and c.w_init_over == 10000 and c.f_con == "log"


def test_weighted_total_matches_hand_sum():
    terms = {"L_comp_cool": 0.1, "L_comp_over": 0.2, "L_comp_tab": 0.3, "L_init_over": 0.4,
             "L_voidBin_init": 1.0, "L_voidBin_med": 0.0, "L_voidArea_init": 0.05,
             "L_voidArea_med": 0.07}
    cfg = ObjectiveConfig(1, 2, 3, 4, 5, 6)
    expected = 0.1 + 2 * 0.2 + 3 * 0.3 + 4 * 0.4 + 5 * 1.0 + 6 * (0.05 + 0.07)
    assert weighted_total(terms, cfg) == pytest.approx(expected, rel=1e-15)


def test_product_shape(rectangle):
    assert rectangle.shape == (50, 50)
    assert rectangle.areas.cool_sum == 600
    assert isinstance(rectangle, Product)


def test_report_void_free_flag():
    kw = dict.fromkeys(["total_loss", "L_comp_cool", "L_comp_over", "L_comp_tab", "L_init_over",
                        "L_voidBin_init", "L_voidBin_med", "L_voidArea_init", "L_voidArea_med",
                        "coverage_fraction", "overflow_ratio", "taboo_violation_fraction",
                        "void_area_fraction"], 0.0)
    assert EvaluationReport(**kw).void_free
    assert not EvaluationReport(**kw, void_count_med=1).void_free
