import pytest

from timpath.fixtures import FIXTURES
from timpath.model import ObjectiveConfig, ValidationError
from timpath.sweep import (
    SweepConfig,
    meets_convergence,
    row_from_trials,
    rows_from_store,
    rows_to_doc,
    run_sweep,
    sweep_from_doc,
    sweep_to_doc,
)

from helpers import stub_trial


def test_row_arithmetic():
    trials = [stub_trial(0, 0.9), stub_trial(1, 0.5), stub_trial(2), stub_trial(3, 0.85)]
    row = row_from_trials(ObjectiveConfig(), trials)
    assert row.coverage_ratio == pytest.approx((0.9 + 0.5 + 0.85) / 3)
    assert row.convergence_ratio == 0.5
    assert row.converged == (0, 3)
    assert row.failures == 1 and row.runs == 4
    assert row.average_performance == (row.coverage_ratio + row.convergence_ratio) / 2


def test_convergence_conditions():
    from dataclasses import replace

    ok = stub_trial(0, 0.8)
    assert meets_convergence(ok)
    r = ok.best_report
    assert not meets_convergence(replace(ok, best_report=replace(r, coverage_fraction=0.79)))
    assert not meets_convergence(replace(ok, best_report=replace(r, taboo_violation_fraction=0.02)))
    assert not meets_convergence(replace(ok, best_report=replace(r, void_area_fraction=0.06)))
    assert meets_convergence(replace(ok, best_report=replace(r, void_area_fraction=0.05)))
    assert not meets_convergence(stub_trial(1))


def test_weights_must_come_from_the_level_set():
    with pytest.raises(ValidationError, match="w_comp_tab"):
        SweepConfig((ObjectiveConfig(w_comp_tab=50.0),))
    with pytest.raises(ValidationError):
        SweepConfig(())
    SweepConfig((ObjectiveConfig(w_comp_tab=10000.0, w_voidArea=0.0),))


def test_sweep_document_roundtrip():
    sweep = SweepConfig((ObjectiveConfig(), ObjectiveConfig(w_voidBin=10.0, w_voidArea=0.0)),
                        runs_per_config=3, segment_range=(2, 4), iterations=9, seed=5)
    assert sweep_from_doc(sweep_to_doc(sweep)) == sweep
    with pytest.raises(ValidationError):
        sweep_from_doc({"configs": [{"w_nope": 1}]})


def test_rows_recomputed_from_store_match(tmp_path):
    p = FIXTURES["taboo-islands"]()
    zero = ObjectiveConfig(w_comp_over=0.0, w_comp_tab=0.0, w_init_over=0.0, w_voidArea=0.0)
    sweep = SweepConfig((ObjectiveConfig(), zero), runs_per_config=2, segment_range=(2, 3),
                        iterations=3)
    rows = run_sweep(p, sweep, out_dir=tmp_path)
    assert rows_from_store(tmp_path, sweep) == rows
    for row in rows:
        assert row.runs == 2
        assert 0 <= row.coverage_ratio <= 1 and 0 <= row.convergence_ratio <= 1
    assert len(rows_to_doc(rows)["rows"]) == 2


def test_all_zero_weights_never_converge():
    # with nothing to minimize the best candidate is the first one sampled, a
    # short path around the centroid that covers far too little
    p = FIXTURES["taboo-islands"]()
    zero = ObjectiveConfig(w_comp_over=0.0, w_comp_tab=0.0, w_init_over=0.0, w_voidArea=0.0)
    (row,) = run_sweep(p, SweepConfig((zero,), runs_per_config=4, segment_range=(5, 6),
                                      iterations=5))
    assert row.convergence_ratio <= 0.25
