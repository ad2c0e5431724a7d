import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from channel.distribution import GainDistribution, build_gain_distribution  # noqa: E402
from ops.config import SystemConfig  # noqa: E402


def toy_config(arrival_rate: int = 1, buffer_size: int = 3, **changes) -> SystemConfig:
    """
    Tiny buffer with a noiseless pilot and one subcarrier, so the frame
    power at eps = 0.1 over the three-point gain law is 2^r / 4.
    """
    params = dict(
        M=8,
        N=1,
        packet_bits=1.0,
        gamma=1.0,
        pilot_power=float("inf"),
        arrival_rate=arrival_rate,
        buffer_size=buffer_size,
        drop_penalty_s=0.001,
        frame_duration_s=0.00025,
        reliability_constrained=False,
    )
    params.update(changes)
    return SystemConfig(**params)


@pytest.fixture
def toy_cfg():
    return toy_config()


@pytest.fixture
def toy_dist():
    return GainDistribution.from_samples([0.5, 1.0, 2.0])


@pytest.fixture
def su_cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def su_dist():
    return build_gain_distribution(SystemConfig(), n_samples=20_000, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
