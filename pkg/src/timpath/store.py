"""Append-only run directories: one document per trial plus an index.

Layout::

    <run>/run.json            run metadata (product, config, search settings)
    <run>/trials/trial-NNNNN.json
    <run>/index.json          summary row per trial, rewritten atomically

Trial files are never overwritten, so a run can be resumed after an
interruption by appending further trials.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from . import formats
from .model import ValidationError
from .optimizer import TrialResult


def atomic_write(path: Path, text: str) -> None:
    """Write to a temporary sibling, then rename it over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _summary(trial: TrialResult, filename: str) -> dict:
    r = trial.best_report
    return {
        "index": trial.index,
        "file": filename,
        "seed": trial.seed,
        "n_segments": trial.n_segments,
        "coverage_fraction": None if r is None else r.coverage_fraction,
        "total_loss": None if r is None else formats._num(r.total_loss),
        "error": None if trial.error is None else trial.error.splitlines()[0],
    }


class RunStore:
    def __init__(self, root):
        self.root = Path(root)
        self.trial_dir = self.root / "trials"
        self.index_path = self.root / "index.json"
        self.meta_path = self.root / "run.json"

    @classmethod
    def create(cls, root, meta: dict, resume: bool = False) -> RunStore:
        """Open ``root`` for appending.

        A directory that already holds trials is only reused with
        ``resume=True`` and identical metadata.
        """
        store = cls(root)
        store.trial_dir.mkdir(parents=True, exist_ok=True)
        doc = {**formats.header("run"), **meta}
        if store.meta_path.exists():
            old = formats.read(store.meta_path, "run")
            if store.entries() and not resume:
                raise ValidationError(
                    f"{store.root} already holds trials; pass --resume to append"
                )
            if store.entries() and old != json.loads(formats.dumps(doc)):
                raise ValidationError(f"{store.root} was created with different settings")
        atomic_write(store.meta_path, formats.dumps(doc))
        if not store.index_path.exists():
            atomic_write(store.index_path, formats.dumps({**formats.header("index"),
                                                          "trials": []}))
        return store

    def meta(self) -> dict:
        return formats.read(self.meta_path, "run")

    def entries(self) -> list[dict]:
        if not self.index_path.exists():
            return []
        return formats.read(self.index_path, "index")["trials"]

    def next_index(self) -> int:
        entries = self.entries()
        return max((e["index"] for e in entries), default=-1) + 1

    def append(self, trial: TrialResult) -> Path:
        name = f"trial-{trial.index:05d}.json"
        path = self.trial_dir / name
        if path.exists():
            raise ValidationError(f"trial file {path} already exists; refusing to overwrite")
        atomic_write(path, formats.dumps(formats.trial_to_doc(trial)))
        entries = self.entries()
        entries.append(_summary(trial, f"trials/{name}"))
        entries.sort(key=lambda e: e["index"])
        atomic_write(self.index_path,
                     formats.dumps({**formats.header("index"), "trials": entries}))
        return path

    def load_trials(self) -> list[TrialResult]:
        """Every persisted trial, in index order."""
        return [formats.trial_from_doc(formats.read(self.root / e["file"], "trial"))
                for e in self.entries()]
