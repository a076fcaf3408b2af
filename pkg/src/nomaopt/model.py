"""Domain types and rate expressions shared by every solver.

Rates are in nats per channel use. Bandwidth is normalized to one, so a
user holding a fraction ``alpha`` of the band sees noise ``alpha * N0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "EPS",
    "InvalidInputError",
    "Scheme",
    "SystemConfig",
    "ChannelRealization",
    "Allocation",
    "RateReport",
    "order_channels",
    "noma_rate_vector",
    "oma_rate_vector",
    "rel_close",
    "within_budget",
    "FEASIBILITY_RTOL",
]

#: Tolerance used by invariant checks (relative where a scale exists).
EPS = 1e-9
#: A budget this close above the minimum power still counts as feasible, so
#: that ties computed along different rounding paths agree across schemes.
FEASIBILITY_RTOL = 1e-12


class InvalidInputError(ValueError):
    """Raised for malformed gains, powers or dimensions."""


class Scheme(str, enum.Enum):
    NOMA = "NOMA"
    OMA1 = "OMA1"
    OMA2 = "OMA2"

    def __str__(self) -> str:
        return self.value


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be a one-dimensional vector")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SystemConfig:
    """Budget and fairness target of one downlink instance.

    Parameters
    ----------
    total_power : float
        Total transmit power ``P`` (linear).
    noise_power : float
        Noise power ``N0`` (linear).
    min_rate : float
        Per-user minimum rate ``r*`` in nats/s/Hz.
    num_users : int
        Number of users ``K``.
    """

    total_power: float
    noise_power: float
    min_rate: float
    num_users: int

    def __post_init__(self):
        if not np.isfinite(self.total_power) or self.total_power <= 0:
            raise InvalidInputError("total_power must be positive")
        if not np.isfinite(self.noise_power) or self.noise_power <= 0:
            raise InvalidInputError("noise_power must be positive")
        if not np.isfinite(self.min_rate) or self.min_rate < 0:
            raise InvalidInputError("min_rate must be non-negative")
        if int(self.num_users) != self.num_users or self.num_users < 1:
            raise InvalidInputError("num_users must be a positive integer")

    @classmethod
    def from_snr_db(cls, snr_db: float, min_rate: float, num_users: int,
                    noise_power: float = 1.0) -> "SystemConfig":
        """Build a config whose budget is ``N0 * 10**(snr_db/10)``."""
        return cls(noise_power * 10.0 ** (snr_db / 10.0), noise_power,
                   min_rate, num_users)


@dataclass(frozen=True)
class ChannelRealization:
    """Channel power gains ``|h_i|^2`` ordered strongest first."""

    gains: np.ndarray

    def __post_init__(self):
        gains = _frozen_array(self.gains, "gains")
        if gains.size == 0:
            raise InvalidInputError("at least one channel gain is required")
        if not np.all(np.isfinite(gains)) or np.any(gains <= 0):
            raise InvalidInputError("channel gains must be finite and positive")
        if np.any(np.diff(gains) > 0):
            raise InvalidInputError(
                "channel gains must be sorted non-increasing; use order_channels")
        object.__setattr__(self, "gains", gains)

    @property
    def num_users(self) -> int:
        return self.gains.size

    def check_users(self, num_users: int) -> None:
        if num_users != self.num_users:
            raise InvalidInputError(
                f"config has {num_users} users but channel has {self.num_users}")


@dataclass(frozen=True)
class Allocation:
    """Per-user powers, bandwidth fractions and the rates they achieve."""

    powers: np.ndarray
    bandwidth_fractions: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        for name in ("powers", "bandwidth_fractions", "rates"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), name))
        if not (self.powers.size == self.bandwidth_fractions.size == self.rates.size):
            raise InvalidInputError("allocation vectors must have equal length")

    @property
    def total_power(self) -> float:
        return float(self.powers.sum())

    @property
    def sum_rate(self) -> float:
        return float(self.rates.sum())

    @staticmethod
    def uniform_fractions(num_users: int) -> np.ndarray:
        return np.full(num_users, 1.0 / num_users)


@dataclass(frozen=True)
class RateReport:
    """Outcome of one scheme on one instance.

    ``sum_rate`` is 0 and ``allocation`` is None when the instance is in
    outage, i.e. ``min_required_power > total_power``.
    """

    scheme: Scheme
    feasible: bool
    min_required_power: float
    sum_rate: float
    allocation: Optional[Allocation] = field(default=None)


def order_channels(raw_gains: Sequence[float]) -> ChannelRealization:
    """Sort positive channel power gains strongest first.

    The sort is stable, so tied users keep their relative input order.
    """
    gains = np.asarray(raw_gains, dtype=float)
    if gains.ndim != 1 or gains.size == 0:
        raise InvalidInputError("gains must be a non-empty vector")
    if not np.all(np.isfinite(gains)) or np.any(gains <= 0):
        raise InvalidInputError("gains must be finite and strictly positive")
    order = np.argsort(-gains, kind="stable")
    return ChannelRealization(gains[order])


def noma_rate_vector(powers, channel: ChannelRealization,
                     noise_power: float) -> np.ndarray:
    """Per-user NOMA rates under SIC with decoding order 1..K.

    User ``i`` cancels the signals of the weaker users ``j > i`` and treats
    the stronger users' signals ``j < i`` as interference.
    """
    powers = np.asarray(powers, dtype=float)
    if powers.shape != channel.gains.shape:
        raise InvalidInputError("powers and gains have different lengths")
    if np.any(powers < 0):
        raise InvalidInputError("powers must be non-negative")
    g = channel.gains
    interference = np.concatenate(([0.0], np.cumsum(powers)[:-1]))
    return np.log1p(powers * g / (noise_power + g * interference))


def oma_rate_vector(powers, fractions, channel: ChannelRealization,
                    noise_power: float) -> np.ndarray:
    """Per-user orthogonal rates ``alpha_i ln(1 + P_i g_i / (alpha_i N0))``."""
    powers = np.asarray(powers, dtype=float)
    fractions = np.asarray(fractions, dtype=float)
    if powers.shape != channel.gains.shape or fractions.shape != powers.shape:
        raise InvalidInputError("powers, fractions and gains have different lengths")
    if np.any(powers < 0) or np.any(fractions <= 0):
        raise InvalidInputError("powers must be non-negative and fractions positive")
    return fractions * np.log1p(powers * channel.gains / (fractions * noise_power))


def within_budget(min_power, budget):
    """``min_power <= budget`` up to :data:`FEASIBILITY_RTOL`; works on arrays."""
    return min_power <= budget * (1.0 + FEASIBILITY_RTOL)


def rel_close(a: float, b: float, tol: float = EPS) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))
