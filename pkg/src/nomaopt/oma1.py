"""OMA with equal time/frequency shares: only the powers are optimized."""

from __future__ import annotations

import numpy as np
from numba import njit

from .model import (FEASIBILITY_RTOL, Allocation, ChannelRealization, RateReport,
                    Scheme, SystemConfig, oma_rate_vector, within_budget)
from .waterfill import WaterfillSolution, _solution, fill, waterfill

__all__ = ["oma1_min_power", "oma1_optimal", "oma1_waterfill", "waterfill"]


def _min_power(gains: np.ndarray, min_rate: float, noise_power: float) -> np.ndarray:
    K = gains.shape[-1]
    return np.expm1(K * min_rate) * noise_power / K * np.sum(1.0 / gains, axis=-1)


def oma1_min_power(channel: ChannelRealization, min_rate: float,
                   noise_power: float, num_users: int | None = None) -> float:
    """``P_O1* = (e^{K r*} - 1) (N0/K) sum_i 1/g_i``."""
    if num_users is not None:
        channel.check_users(num_users)
    return float(_min_power(channel.gains, min_rate, noise_power))


def _thresholds(gains, min_rate, noise_power):
    # N0 / (K gbar_i) with gbar_i = g_i e^{-K r*}, formed in log space
    K = gains.shape[-1]
    return np.exp(np.log(noise_power / K) - np.log(gains) + K * min_rate)


def oma1_waterfill(config: SystemConfig, channel: ChannelRealization,
                   budget: float) -> WaterfillSolution:
    """Water-fill ``budget`` of excess power over the effective gains."""
    t = _thresholds(channel.gains, config.min_rate, config.noise_power)
    return _solution(t, np.ones_like(t), budget, 1.0 / config.num_users)


def oma1_optimal(config: SystemConfig, channel: ChannelRealization) -> RateReport:
    channel.check_users(config.num_users)
    K, r, N0 = config.num_users, config.min_rate, config.noise_power
    p_min = oma1_min_power(channel, r, N0)
    if not within_budget(p_min, config.total_power):
        return RateReport(Scheme.OMA1, False, p_min, 0.0, None)
    per_user = np.expm1(K * r) * N0 / (K * channel.gains)
    wf = oma1_waterfill(config, channel, max(config.total_power - p_min, 0.0))
    powers = per_user + wf.excess_powers
    fractions = Allocation.uniform_fractions(K)
    rates = oma_rate_vector(powers, fractions, channel, N0)
    return RateReport(Scheme.OMA1, True, p_min, K * r + wf.rate_gain,
                      Allocation(powers, fractions, rates))


@njit(cache=True)
def _sum_rate_batch(G, r, N0, P):
    # row-wise optimal sum rate; 0 for rows in outage
    T, K = G.shape
    out = np.zeros(T)
    weights = np.ones(K)
    for t in range(T):
        g = G[t]
        p_min = np.expm1(K * r) * N0 / K * np.sum(1.0 / g)
        if p_min > P * (1.0 + FEASIBILITY_RTOL):
            continue
        thresholds = np.exp(np.log(N0 / K) - np.log(g) + K * r)
        _, _, gain = fill(thresholds, weights, max(P - p_min, 0.0))
        out[t] = K * r + gain / K
    return out
