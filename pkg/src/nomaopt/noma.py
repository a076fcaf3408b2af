"""Closed-form NOMA minimum power and optimal sum rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (Allocation, ChannelRealization, RateReport, Scheme,
                    SystemConfig, noma_rate_vector, within_budget)

__all__ = [
    "NomaSplit",
    "noma_min_power",
    "noma_min_power_per_user",
    "noma_split",
    "noma_optimal",
    "excess_rate",
]


def _min_powers(gains: np.ndarray, min_rate: float, noise_power: float) -> np.ndarray:
    # gains has shape (..., K); the recursion runs over the last axis.
    factor = np.expm1(min_rate)
    out = np.empty_like(gains, dtype=float)
    acc = np.zeros(gains.shape[:-1])
    for i in range(gains.shape[-1]):
        out[..., i] = factor * (noise_power / gains[..., i] + acc)
        acc = acc + out[..., i]
    return out


def noma_min_power_per_user(channel: ChannelRealization, min_rate: float,
                            noise_power: float) -> np.ndarray:
    """Least power per user so that every user reaches exactly ``min_rate``.

    Evaluated by the recursion ``P_i = (e^r - 1)(N0/g_i + sum_{j<i} P_j)``,
    strongest user first.
    """
    return _min_powers(channel.gains, min_rate, noise_power)


def noma_min_power(channel: ChannelRealization, min_rate: float,
                   noise_power: float) -> float:
    """Total minimum power ``P_N*``; the instance is in outage above budget."""
    return float(noma_min_power_per_user(channel, min_rate, noise_power).sum())


def excess_rate(excess_power, strongest_gain, noise_power, log_scale):
    """``ln(1 + excess * g_1 / (N0 * e^{log_scale}))`` without overflow.

    ``log_scale`` is ``K r*``. Works elementwise on arrays; non-positive
    excess yields 0.
    """
    excess_power = np.asarray(excess_power, dtype=float)
    with np.errstate(divide="ignore"):
        z = np.log(np.maximum(excess_power, 0.0) * strongest_gain / noise_power) - log_scale
    return np.logaddexp(0.0, z)


@dataclass(frozen=True)
class NomaSplit:
    """Budget split into per-user minimum powers and the excess."""

    per_user_min_power: np.ndarray
    total_min_power: float
    excess_power: float


def noma_split(config: SystemConfig, channel: ChannelRealization) -> NomaSplit:
    channel.check_users(config.num_users)
    per_user = noma_min_power_per_user(channel, config.min_rate, config.noise_power)
    total = float(per_user.sum())
    return NomaSplit(per_user, total, config.total_power - total)


def _allocation(config: SystemConfig, channel: ChannelRealization,
                excess: float) -> np.ndarray:
    # The excess goes to user 1 in the interference-normalized domain: user 1
    # gets excess * e^{-(K-1) r*} on top of its minimum and every weaker user
    # is topped up to hold exactly r* against the extra interference.
    g = channel.gains
    r = config.min_rate
    factor = np.expm1(r)
    powers = np.empty_like(g)
    powers[0] = factor * config.noise_power / g[0] + excess * np.exp(-(g.size - 1) * r)
    acc = powers[0]
    for i in range(1, g.size):
        powers[i] = factor * (config.noise_power / g[i] + acc)
        acc += powers[i]
    return powers


def noma_optimal(config: SystemConfig, channel: ChannelRealization) -> RateReport:
    """Optimal NOMA sum rate and power allocation under the fairness target.

    When feasible, ``R_N = K r* + ln(1 + (P - P_N*) g_1 / (N0 e^{K r*}))``.
    Users 2..K are held at exactly ``r*``; all rate above ``K r*`` is
    earned by the strongest user.
    """
    split = noma_split(config, channel)
    K, r = config.num_users, config.min_rate
    if not within_budget(split.total_min_power, config.total_power):
        return RateReport(Scheme.NOMA, False, split.total_min_power, 0.0, None)
    excess = max(split.excess_power, 0.0)
    delta = float(excess_rate(excess, channel.gains[0], config.noise_power, K * r))
    powers = _allocation(config, channel, excess)
    rates = noma_rate_vector(powers, channel, config.noise_power)
    allocation = Allocation(powers, Allocation.uniform_fractions(K), rates)
    return RateReport(Scheme.NOMA, True, split.total_min_power, K * r + delta,
                      allocation)
