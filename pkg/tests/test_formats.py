import json
from dataclasses import replace

import numpy as np
import pytest

from timpath import formats
from timpath.fixtures import FIXTURES
from timpath.formats import FormatError
from timpath.model import DispensePath, GapSpec, ObjectiveConfig, ValidationError
from timpath.objective import Evaluator
from timpath.optimizer import CmaesConfig, optimize
from timpath.render import encode_ppm


def _roundtrip(doc, kind):
    return formats.parse(formats.dumps(doc), kind)


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_product_roundtrip(name):
    p = FIXTURES[name]()
    back = formats.product_from_doc(_roundtrip(formats.product_to_doc(p), "product"))
    assert back.name == p.name and back.gap == p.gap and back.cell_size == p.cell_size
    for m in ("cool", "over", "tab"):
        np.testing.assert_array_equal(getattr(back.areas, m), getattr(p.areas, m))


def test_shipped_data_files_load():
    from pathlib import Path

    root = Path(__file__).resolve().parent.parent / "data"
    for f in sorted((root / "products").glob("*.json")):
        formats.load_product(f)
    for f in sorted((root / "paths").glob("*.json")):
        formats.path_from_doc(formats.read(f, "path"))
    formats.config_from_doc(formats.read(root / "configs" / "default.json", "config"))


def test_product_masks_default_from_cooling():
    doc = {**formats.header("product"), "width": 3, "height": 2, "gap": {"g_final": 1.0},
           "masks": {"cool": [[0, 1, 0], [0, 1, 0.5]]}}
    p = formats.product_from_doc(doc)
    np.testing.assert_array_equal(p.areas.over, [[1, 0, 1], [1, 0, 0.5]])
    assert not p.areas.tab.any()


@pytest.mark.parametrize("masks,fragment", [
    ({"cool": [[0, 1], [1]]}, "not rectangular"),
    ({"cool": [[0, 1, 1]]}, "declares 2x2"),
    ({"cool": [[0, "x"], [1, 1]]}, "row 0, col 1"),
    ({"cool": [[0, 2], [1, 1]]}, "outside [0, 1]"),
    ({"cool": [[0, 0], [0, 0]]}, "empty cooling surface"),
])
def test_bad_masks_are_reported(masks, fragment):
    doc = {**formats.header("product"), "width": 2, "height": 2, "gap": {"g_final": 1.0},
           "masks": masks}
    with pytest.raises(ValidationError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
        formats.product_from_doc(doc)


def test_syntax_error_carries_line_number(tmp_path):
    f = tmp_path / "broken.json"
    f.write_text('{\n "schema": "timpath/path",\n "version": 1,\n "points": [[1, 2],, [3, 4]]\n}\n')
    with pytest.raises(FormatError) as err:
        formats.read(f, "path")
    assert err.value.line == 4
    assert "broken.json, line 4" in str(err.value)


def test_wrong_schema_and_version():
    with pytest.raises(FormatError, match="timpath/path"):
        formats.parse(json.dumps(formats.header("config")), "path")
    with pytest.raises(FormatError, match="version"):
        formats.parse(json.dumps({"schema": "timpath/path", "version": 99}), "path")
    with pytest.raises(FormatError, match="top level"):
        formats.parse("[1, 2]", "path")


def test_missing_file(tmp_path):
    with pytest.raises(FormatError, match="cannot read"):
        formats.read(tmp_path / "nope.json", "path")


def test_path_roundtrip_with_frozen():
    frozen = np.array([[True, False], [False, False], [False, True]])
    path = DispensePath([[1.5, 2.0], [3.25, 4.0], [5.0, 6.125]], 0.75, frozen)
    back = formats.path_from_full_doc(_roundtrip(formats.path_to_doc(path), "path"))
    assert back == path
    pts, feed, fz = formats.path_from_doc(formats.path_to_doc(path, feedrate=False))
    assert feed is None and fz.tolist() == frozen.tolist()


@pytest.mark.parametrize("points", [[[1, 2]], [[1, 2, 3], [4, 5, 6]], [[1, True], [2, 3]],
                                    "nope"])
def test_bad_paths(points):
    with pytest.raises(ValidationError):
        formats.path_from_doc({**formats.header("path"), "points": points, "feedrate": 1.0})


def test_config_roundtrip_and_unknown_fields():
    cfg = ObjectiveConfig(w_comp_cool=10, f_area="squ", f_con="log", lin_slope=2.0)
    assert formats.config_from_doc(_roundtrip(formats.config_to_doc(cfg), "config")) == cfg
    with pytest.raises(ValidationError, match="w_typo"):
        formats.config_from_doc({"w_typo": 1})
    with pytest.raises(ValidationError):
        formats.config_from_doc({"f_area": 3})
    assert formats.config_from_doc({}) == ObjectiveConfig()


def test_cmaes_roundtrip():
    cfg = CmaesConfig(population_size=9, sigma0=3.0, max_iterations=7, seed=4, restart_count=1)
    assert formats.cmaes_from_dict(formats.cmaes_to_dict(cfg)) == cfg
    with pytest.raises(ValidationError):
        formats.cmaes_from_dict({"popsize": 3})


def test_report_roundtrip_including_tolerance_and_infinity():
    p = FIXTURES["border-taboo"]()
    ev = Evaluator(p)
    r = ev.evaluate(ev.path_for([[17, 12], [33, 12], [33, 20]]), tolerance_mode=True)
    assert formats.report_from_doc(_roundtrip(formats.report_to_doc(r), "report")) == r
    r_inf = replace(r, overflow_ratio=float("inf"))
    text = formats.dumps(formats.report_to_doc(r_inf))
    assert formats.report_from_doc(formats.parse(text, "report")) == r_inf


def test_trial_roundtrip(rectangle):
    t = optimize(rectangle, n_segments=2, cmaes=CmaesConfig(max_iterations=3, seed=1))
    assert formats.trial_from_doc(_roundtrip(formats.trial_to_doc(t), "trial")) == t


def test_dump_keeps_number_rows_on_one_line():
    text = formats.dumps({"m": [[0, 1], [1, 0]]})
    assert "[0, 1]" in text and "[1, 0]" in text


def test_colour_pixmap_product(tmp_path):
    rgb = np.full((4, 6, 3), 255, np.uint8)
    rgb[1:3, 1:5] = (0, 255, 0)
    rgb[0, 0] = (255, 0, 0)
    rgb[3, 5] = (128, 255, 128)
    f = tmp_path / "part.ppm"
    f.write_bytes(encode_ppm(rgb))
    p = formats.load_product(f)
    assert p.name == "part" and p.shape == (4, 6)
    assert p.areas.cool[1:3, 1:5].tolist() == [[1.0] * 4] * 2
    assert p.areas.cool[3, 5] == pytest.approx(127 / 255)
    assert p.areas.tab[0, 0] == 1.0 and p.areas.tab.sum() == 1.0
    np.testing.assert_allclose(p.areas.over, 1 - p.areas.cool)
    assert p.gap == GapSpec(1.0)
