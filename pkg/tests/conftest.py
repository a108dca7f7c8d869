import numpy as np
import pytest
from hypothesis import settings

from depthalloc.coverage import condense_train
from depthalloc.grid import Grid
from depthalloc.train import build_train

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def small_train(d_min=0.5, d_max=3.0, spacing=0.25, pupil=3.0, cols=41, bins=16, ages=(10, 70)):
    grid = Grid.uniform(d_min, d_max, cols, ages[0], ages[1], bins)
    return build_train(d_min, d_max, spacing, pupil, grid)


@pytest.fixture(scope="session")
def train_small():
    return small_train()


@pytest.fixture(scope="session")
def condensed_small(train_small):
    return condense_train(train_small)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
