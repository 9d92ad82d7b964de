import numpy as np
import pytest

from cfris.channel import ScenarioConfig, generate_statistics
from cfris.estimator import PilotAssignment


def small_scenario(**overrides) -> ScenarioConfig:
    """A scenario small enough for dense reference computations."""
    params = dict(
        n_aps=2,
        n_antennas=2,
        n_elements=8,
        n_users=4,
        tau_p=2,
        pilot_snr=2e13,
        unblock_prob=0.5,
    )
    params.update(overrides)
    return ScenarioConfig(**params)


@pytest.fixture(scope="session")
def scenario():
    return small_scenario()


@pytest.fixture(scope="session")
def stats(scenario):
    return generate_statistics(scenario, np.random.default_rng(7))


@pytest.fixture(scope="session")
def pilots(scenario):
    return PilotAssignment.round_robin(scenario.n_users, scenario.tau_p)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
