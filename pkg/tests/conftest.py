import numpy as np
import pytest
from hypothesis import settings

from timpath.fixtures import FIXTURES

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=sorted(FIXTURES))
def any_product(request):
    return FIXTURES[request.param]()


@pytest.fixture
def rectangle():
    return FIXTURES["rectangle"]()


def random_path_points(rng, n_points, lo=-5.0, hi=55.0):
    return rng.uniform(lo, hi, size=(n_points, 2))


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
