import numpy as np
import pytest

from eqyamabe.blowup import build_blowup, greens_round
from eqyamabe.geom import ClosedModelMetric
from eqyamabe.groups import FiniteGroupAction


@pytest.fixture(scope="session")
def profile():
    return greens_round()


@pytest.fixture(scope="session")
def blow_antipodal(profile):
    return build_blowup(ClosedModelMetric.sphere(), FiniteGroupAction.antipodal(), profile=profile)


@pytest.fixture(scope="session")
def blow_rp3(profile):
    return build_blowup(ClosedModelMetric.projective(), FiniteGroupAction.trivial(), profile=profile)


@pytest.fixture(scope="session")
def blow_lens3(profile):
    return build_blowup(ClosedModelMetric.sphere(), FiniteGroupAction.lens(3), profile=profile)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
