import numpy as np
import pytest

from stcausal.caching import clear_artifact_caches


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run the slow tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow", default=False):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="function", autouse=True)
def clear_artifact_caches_before_tests():
    clear_artifact_caches()


@pytest.fixture
def rng():
    return np.random.default_rng(20150301)
