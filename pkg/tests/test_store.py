import pytest

from timpath.model import ValidationError
from timpath.optimizer import CmaesConfig, optimize
from timpath.store import RunStore, atomic_write

META = {"product": "rectangle", "segments": [2, 2]}


@pytest.fixture(scope="module")
def trials():
    from timpath.fixtures import rectangle

    p = rectangle()
    return [optimize(p, n_segments=2, cmaes=CmaesConfig(max_iterations=2, seed=s), index=s)
            for s in range(3)]


def test_append_and_reload(tmp_path, trials):
    store = RunStore.create(tmp_path / "run", META)
    for t in trials:
        store.append(t)
    assert store.load_trials() == trials
    assert [e["index"] for e in store.entries()] == [0, 1, 2]
    assert store.next_index() == 3
    assert store.meta()["product"] == "rectangle"


def test_existing_trials_need_resume(tmp_path, trials):
    root = tmp_path / "run"
    RunStore.create(root, META).append(trials[0])
    with pytest.raises(ValidationError, match="resume"):
        RunStore.create(root, META)
    again = RunStore.create(root, META, resume=True)
    again.append(trials[1])
    assert again.load_trials() == trials[:2]


def test_resume_with_other_settings_is_refused(tmp_path, trials):
    root = tmp_path / "run"
    RunStore.create(root, META).append(trials[0])
    with pytest.raises(ValidationError, match="different settings"):
        RunStore.create(root, {**META, "segments": [3, 3]}, resume=True)


def test_trial_files_are_never_overwritten(tmp_path, trials):
    store = RunStore.create(tmp_path / "run", META)
    path = store.append(trials[0])
    before = path.read_bytes()
    with pytest.raises(ValidationError, match="overwrite"):
        store.append(trials[0])
    assert path.read_bytes() == before
    assert len(store.entries()) == 1


def test_empty_directory_can_be_reused(tmp_path):
    RunStore.create(tmp_path / "run", META)
    assert RunStore.create(tmp_path / "run", {"other": 1}).entries() == []


def test_atomic_write_leaves_no_temporary_files(tmp_path):
    target = tmp_path / "f.json"
    atomic_write(target, "one")
    atomic_write(target, "two")
    assert target.read_text() == "two"
    assert [p.name for p in tmp_path.iterdir()] == ["f.json"]
