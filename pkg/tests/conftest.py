import pytest

from rollupcrowd.harness.world import World


@pytest.fixture
def world():
    return World.build({"requesters": 2, "workers": 3, "evaluators": 7}, "direct")


@pytest.fixture
def l2_world():
    return World.build({"requesters": 2, "workers": 3, "evaluators": 7}, "l2")
