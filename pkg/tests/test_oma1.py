import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nomaopt.model import SystemConfig, order_channels
from nomaopt.oma1 import (_sum_rate_batch, oma1_min_power, oma1_optimal,
                          oma1_waterfill)
from nomaopt.oma2 import oma2_inner_power

from strategies import channels, log_factor, positive_rate, rate

# Frozen from a bracketing root solve of the budget equation and an SLSQP
# solve of the raw equal-share problem.
REF_MIN_POWER = 6.679937923115684
REF_LEVEL = 1.8274105128020552
REF_EXCESS_POWERS = [1.76045872, 1.55960335, 0.0]
REF_SUM_RATE = 4.742356825690768


def test_reference_min_power(ref_channel):
    assert oma1_min_power(ref_channel, 1.0, 1.0) == pytest.approx(REF_MIN_POWER, rel=1e-12)


def test_reference_waterfill(ref_config, ref_channel):
    sol = oma1_waterfill(ref_config, ref_channel, 10.0 - REF_MIN_POWER)
    assert sol.water_level == pytest.approx(REF_LEVEL, rel=1e-12)
    np.testing.assert_allclose(sol.excess_powers, REF_EXCESS_POWERS, atol=1e-8)
    assert sol.active_set == (0, 1)


def test_reference_sum_rate(ref_config, ref_channel):
    rep = oma1_optimal(ref_config, ref_channel)
    assert rep.sum_rate == pytest.approx(REF_SUM_RATE, rel=1e-10)
    assert rep.allocation.rates.sum() == pytest.approx(REF_SUM_RATE, rel=1e-10)
    np.testing.assert_allclose(rep.allocation.bandwidth_fractions, 1 / 3)


def test_outage(ref_channel):
    rep = oma1_optimal(SystemConfig(5.0, 1.0, 1.0, 3), ref_channel)
    assert not rep.feasible and rep.sum_rate == 0.0


def test_user_count_checked(ref_channel):
    with pytest.raises(ValueError):
        oma1_min_power(ref_channel, 1.0, 1.0, num_users=2)


@given(channels(), positive_rate, log_factor)
def test_allocation_tight_and_fair(ch, r, lf):
    P = oma1_min_power(ch, r, 1.0) * 10 ** lf
    rep = oma1_optimal(SystemConfig(P, 1.0, r, ch.num_users), ch)
    assert rep.allocation.total_power == pytest.approx(P, rel=1e-9)
    assert rep.allocation.rates.min() >= r * (1 - 1e-9)
    assert rep.allocation.rates.sum() == pytest.approx(rep.sum_rate, rel=1e-9)


@given(channels(), positive_rate, log_factor)
def test_batch_kernel_matches_scalar(ch, r, lf):
    P = oma1_min_power(ch, r, 1.0) * 10 ** lf * 1.0001
    rep = oma1_optimal(SystemConfig(P, 1.0, r, ch.num_users), ch)
    batch = _sum_rate_batch(ch.gains[None, :].copy(), r, 1.0, P)[0]
    assert batch == pytest.approx(rep.sum_rate, rel=1e-12)


@given(channels(), positive_rate, log_factor)
def test_uniform_shares_reduce_type_two_to_type_one(ch, r, lf):
    K = ch.num_users
    P = oma1_min_power(ch, r, 1.0) * 10 ** lf
    cfg = SystemConfig(P, 1.0, r, K)
    inner = oma2_inner_power(np.full(K, 1.0 / K), cfg, ch)
    assert inner.feasible
    assert K * r + inner.excess_rate == pytest.approx(oma1_optimal(cfg, ch).sum_rate, rel=1e-9)


@given(channels(), rate, st.floats(0.1, 100.0), st.floats(1e-3, 1e3))
def test_scale_invariance(ch, r, P, scale):
    K = ch.num_users
    a = oma1_optimal(SystemConfig(P, 1.0, r, K), ch)
    b = oma1_optimal(SystemConfig(P * scale, scale, r, K), ch)
    assert a.feasible == b.feasible
    assert a.sum_rate == pytest.approx(b.sum_rate, rel=1e-9)


def test_equal_gains_split_evenly():
    ch = order_channels([2.0, 2.0, 2.0])
    rep = oma1_optimal(SystemConfig(100.0, 1.0, 0.5, 3), ch)
    np.testing.assert_allclose(rep.allocation.powers, 100.0 / 3)
