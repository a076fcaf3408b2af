"""Exact water-filling over parallel channels.

The budget equation ``sum_i w_i [level - t_i]^+ = budget`` is piecewise
linear in ``level``, so the level is found exactly by walking the sorted
thresholds instead of bisecting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = ["WaterfillSolution", "waterfill", "water_level"]


@njit(cache=True)
def water_level(thresholds, weights, budget):
    """Level ``v`` with ``sum w_i [v - t_i]^+ = budget``.

    ``thresholds`` may contain ``inf`` for channels that can never be
    active. Returns ``inf`` only if every threshold is infinite.
    """
    order = np.argsort(thresholds)
    n = thresholds.size
    wsum = 0.0
    wtsum = 0.0
    level = thresholds[order[0]]
    for m in range(n):
        t = thresholds[order[m]]
        if not np.isfinite(t):
            break
        wsum += weights[order[m]]
        wtsum += weights[order[m]] * t
        level = (budget + wtsum) / wsum
        if m == n - 1 or level <= thresholds[order[m + 1]]:
            break
    return level


@njit(cache=True)
def fill(thresholds, weights, budget):
    """Water-fill and return ``(level, powers, rate_gain)``.

    Powers are ``w_i [level - t_i]^+``; the rate gain is
    ``sum_active w_i ln(level / t_i)``.
    """
    n = thresholds.size
    powers = np.zeros(n)
    if budget <= 0.0:
        return np.min(thresholds), powers, 0.0
    level = water_level(thresholds, weights, budget)
    gain = 0.0
    for i in range(n):
        if thresholds[i] < level:
            powers[i] = weights[i] * (level - thresholds[i])
            gain += weights[i] * (np.log(level) - np.log(thresholds[i]))
    return level, powers, gain


@dataclass(frozen=True)
class WaterfillSolution:
    water_level: float
    excess_powers: np.ndarray
    active_set: tuple
    rate_gain: float


def waterfill(effective_gains, budget: float, noise_power: float,
              num_users: int) -> WaterfillSolution:
    """Split ``budget`` over equal-share channels with effective gains.

    Channel ``i`` has floor ``N0 / (K * gbar_i)`` and its rate increment is
    ``(1/K) ln(1 + K p_i gbar_i / N0)``.

    Parameters
    ----------
    effective_gains : array_like
        Effective power gains ``gbar_i``.
    budget : float
        Excess power to distribute, ``>= 0``.
    noise_power : float
        ``N0``.
    num_users : int
        ``K``, the number of equal shares.

    Returns
    -------
    WaterfillSolution
        Water level ``mu``, per-channel powers, indices with positive power,
        and the summed rate increment.
    """
    gbar = np.asarray(effective_gains, dtype=float)
    thresholds = noise_power / (num_users * gbar)
    return _solution(thresholds, np.ones_like(thresholds), budget, 1.0 / num_users)


def _solution(thresholds, weights, budget, rate_scale) -> WaterfillSolution:
    level, powers, gain = fill(np.asarray(thresholds, dtype=float),
                               np.asarray(weights, dtype=float), float(budget))
    active = tuple(int(i) for i in np.flatnonzero(powers > 0))
    return WaterfillSolution(float(level), powers, active, rate_scale * gain)
