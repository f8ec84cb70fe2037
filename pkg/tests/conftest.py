import numpy as np
import pytest

from riemctl.scenarios import SCENARIO_IDS, build


@pytest.fixture(scope="session")
def scenarios():
    """Session-cached scenario fixtures (construction is cheap, synthesis checks
    are not; laws are cached alongside)."""
    cache = {sid: build(sid) for sid in SCENARIO_IDS}
    return cache


@pytest.fixture(scope="session")
def laws(scenarios):
    return {sid: sc.synthesized_control() for sid, sc in scenarios.items()}


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
