import pytest

from rfcrn import build_model, default_model, solve_rvi
from rfcrn.model import ChannelParams, ModelConfig


@pytest.fixture(scope="session")
def default_config():
    return default_model()


@pytest.fixture(scope="session")
def default_tm(default_config):
    return build_model(default_config)


@pytest.fixture(scope="session")
def default_solution(default_tm):
    return solve_rvi(default_tm)


@pytest.fixture(scope="session")
def small_config():
    # The two reference channels on a 3x3 state grid: small enough for
    # exhaustive policy enumeration (2^9 = 512 deterministic policies).
    return ModelConfig(
        channels=(
            ChannelParams(idle_prob=0.1, tx_success_prob=0.95, harvest_success_prob=0.95),
            ChannelParams(idle_prob=0.9, tx_success_prob=0.95, harvest_success_prob=0.70),
        ),
        queue_capacity=2,
        energy_capacity=2,
        tx_cost=1,
        arrival_prob=0.5,
    )


@pytest.fixture(scope="session")
def small_tm(small_config):
    return build_model(small_config)
