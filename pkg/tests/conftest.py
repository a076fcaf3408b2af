import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nomaopt.model import SystemConfig, order_channels
from nomaopt.noma import noma_min_power

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Three-user reference: amplitudes (10, 5, 1), r* = 1, SNR 10 dB, N0 = 1.
REF_GAINS = (100.0, 25.0, 1.0)


@pytest.fixture
def ref_channel():
    return order_channels(REF_GAINS)


@pytest.fixture
def ref_config():
    return SystemConfig(total_power=10.0, noise_power=1.0, min_rate=1.0, num_users=3)


def random_case(rng, K=None, budget_factor=None):
    """Random ordered channel and config with a feasible NOMA budget."""
    K = K or int(rng.integers(1, 5))
    channel = order_channels(10.0 ** rng.uniform(-2, 2, K))
    r = float(rng.uniform(0.05, 2.0))
    factor = budget_factor or 10.0 ** rng.uniform(0, 1.5)
    P = noma_min_power(channel, r, 1.0) * factor
    return SystemConfig(P, 1.0, r, K), channel
