"""Small builders shared by several test modules."""

from timpath.model import DispensePath, EvaluationReport
from timpath.optimizer import TrialResult


def stub_report(coverage, loss=0.0):
    return EvaluationReport(loss, *([0.0] * 8), coverage, 0.0, 0.0, 0.0)


def stub_trial(index, coverage=None, loss=0.0):
    """A finished trial with the given coverage, or a failed one when coverage is None."""
    if coverage is None:
        return TrialResult(None, None, (), 0, index, 1, index=index, error="boom")
    return TrialResult(DispensePath([[0, 0], [1, 1]], 1.0), stub_report(coverage, loss), (), 0,
                       index, 1, index=index)


# criterion number -> (passed, one-line detail), filled by the acceptance tests
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
