import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from nomaopt.verify import waterfill_kkt_violation
from nomaopt.waterfill import fill, water_level, waterfill

thresholds = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=8)
budgets = st.floats(1e-6, 1e4)


def bisected_level(t, w, budget):
    f = lambda v: np.sum(w * np.maximum(v - t, 0.0)) - budget
    return brentq(f, t.min(), t.min() + budget / w.min() + 1.0, xtol=1e-14, rtol=1e-15)


def test_single_channel_takes_everything():
    level, powers, gain = fill(np.array([2.0]), np.array([1.0]), 3.0)
    assert level == pytest.approx(5.0)
    np.testing.assert_allclose(powers, [3.0])
    assert gain == pytest.approx(np.log(2.5))


def test_zero_budget_allocates_nothing():
    _, powers, gain = fill(np.array([1.0, 2.0]), np.ones(2), 0.0)
    assert not powers.any() and gain == 0.0


def test_infinite_threshold_never_active():
    level, powers, _ = fill(np.array([1.0, np.inf]), np.ones(2), 4.0)
    assert level == pytest.approx(5.0)
    assert powers[1] == 0.0


def test_effective_gain_wrapper():
    # floors 1/(2*2) = 0.25 and 1/(2*0.5) = 1.0
    sol = waterfill([2.0, 0.5], 0.5, 1.0, 2)
    assert sol.water_level == pytest.approx(0.75)
    assert sol.active_set == (0,)
    assert sol.rate_gain == pytest.approx(0.5 * np.log(3.0))
    both = waterfill([2.0, 0.5], 1.0, 1.0, 2)
    assert both.water_level == pytest.approx(1.125)
    assert both.active_set == (0, 1)


@given(thresholds, budgets)
def test_level_matches_bisection(ts, budget):
    t = np.array(ts)
    w = np.ones_like(t)
    assert water_level(t, w, budget) == pytest.approx(bisected_level(t, w, budget), rel=1e-9)


@given(thresholds, budgets, st.data())
def test_weighted_kkt_conditions(ts, budget, data):
    t = np.array(ts)
    w = np.array(data.draw(st.lists(st.floats(1e-3, 1.0), min_size=t.size,
                                    max_size=t.size)))
    level, powers, _ = fill(t, w, budget)
    assert waterfill_kkt_violation(t, w, budget, powers, level) <= 1e-9


@given(thresholds, budgets, st.floats(1.01, 10.0))
def test_gain_grows_with_budget(ts, budget, up):
    t = np.array(ts)
    w = np.ones_like(t)
    assert fill(t, w, budget * up)[2] > fill(t, w, budget)[2]


@given(thresholds, budgets, st.data())
def test_water_filling_beats_random_splits(ts, budget, data):
    t = np.array(ts)
    w = np.ones_like(t)
    best = fill(t, w, budget)[2]
    raw = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=t.size, max_size=t.size)))
    if raw.sum() == 0:
        return
    p = budget * raw / raw.sum()
    assert np.sum(np.log1p(p / t)) <= best + 1e-9 * max(1.0, best)
