"""Rayleigh-fading Monte Carlo: outage probability and ergodic sum rate.

Every trial draws its channel from its own counter-based Philox stream keyed
by the run seed, with the trial index in the high counter word. A trial's
draws therefore do not depend on which worker runs it or in what order.
All schemes see the same channel in a given trial.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import oma1, oma2
from .model import ChannelRealization, InvalidInputError, Scheme, within_budget
from .noma import _min_powers, excess_rate
from .oma1 import _min_power as _oma1_min_power

__all__ = [
    "MonteCarloConfig",
    "MonteCarloReport",
    "SCHEMES",
    "trial_generator",
    "sample_channel",
    "sample_gains",
    "min_power_samples",
    "outage_probability",
    "sum_rate_samples",
    "ergodic_sum_rate",
    "simulate_outage",
    "simulate_ergodic",
    "snr_at_outage",
]

logger = logging.getLogger(__name__)

SCHEMES = (Scheme.NOMA, Scheme.OMA1, Scheme.OMA2)
DEFAULT_OUTAGE_TRIALS = 100_000
DEFAULT_ERGODIC_TRIALS = 10_000
_CHUNK = 2048


@dataclass(frozen=True)
class MonteCarloConfig:
    """Fading experiment settings; noise power is fixed to 1."""

    num_users: int
    min_rate: float
    snr_grid_db: tuple
    trials: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db",
                           tuple(float(s) for s in np.atleast_1d(self.snr_grid_db)))
        if self.num_users < 1:
            raise InvalidInputError("num_users must be positive")
        if not self.min_rate >= 0:
            raise InvalidInputError("min_rate must be non-negative")
        if self.trials < 1:
            raise InvalidInputError("trials must be at least 1")
        if not all(np.isfinite(self.snr_grid_db)):
            raise InvalidInputError("SNR grid must be finite")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")

    @property
    def budgets(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.snr_grid_db) / 10.0)


@dataclass(frozen=True)
class MonteCarloReport:
    """Per-scheme estimates on the SNR grid.

    ``outage`` and ``ergodic`` map scheme name to an array aligned with
    ``snr_grid_db``; either may be absent depending on what was simulated.
    """

    config: MonteCarloConfig
    outage: Optional[dict] = field(default=None)
    ergodic: Optional[dict] = field(default=None)

    @property
    def trials(self) -> int:
        return self.config.trials

    @property
    def seed(self) -> int:
        return self.config.seed


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, trial]))


def sample_channel(num_users: int, rng: np.random.Generator) -> ChannelRealization:
    """i.i.d. Rayleigh power gains (unit-mean exponential), strongest first."""
    return ChannelRealization(np.sort(rng.standard_exponential(num_users))[::-1])


def sample_gains(config: MonteCarloConfig, start: int = 0,
                 stop: Optional[int] = None) -> np.ndarray:
    """Ordered gains for trials ``start..stop-1`` as a (trials, K) array."""
    stop = config.trials if stop is None else stop
    K = config.num_users
    out = np.empty((stop - start, K))
    for row, t in enumerate(range(start, stop)):
        out[row] = trial_generator(config.seed, t).standard_exponential(K)
    out.sort(axis=1)
    return out[:, ::-1].copy()


def _chunk_bounds(trials: int):
    return [(s, min(s + _CHUNK, trials)) for s in range(0, trials, _CHUNK)]


def _run_chunks(fn, config, workers, *args):
    bounds = _chunk_bounds(config.trials)
    if workers <= 1 or len(bounds) == 1:
        parts = [fn(config, s, e, *args) for s, e in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, config, s, e, *args) for s, e in bounds]
            parts = [f.result() for f in futures]
    return np.concatenate(parts, axis=0)


def _min_power_chunk(config, start, stop):
    G = sample_gains(config, start, stop)
    r = config.min_rate
    out = np.empty((G.shape[0], 3))
    out[:, 0] = _min_powers(G, r, 1.0).sum(axis=1)
    out[:, 1] = _oma1_min_power(G, r, 1.0)
    out[:, 2] = oma2._min_power_batch(G, r, 1.0)
    return out


def min_power_samples(config: MonteCarloConfig, workers: int = 1) -> np.ndarray:
    """Minimum required power per trial, columns ordered NOMA, OMA1, OMA2."""
    return _run_chunks(_min_power_chunk, config, workers)


def _outage_from_samples(samples: np.ndarray, budgets: np.ndarray) -> dict:
    return {s.value: (~within_budget(samples[:, j][:, None], budgets[None, :])).mean(axis=0)
            for j, s in enumerate(SCHEMES)}


def simulate_outage(config: MonteCarloConfig, workers: int = 1) -> MonteCarloReport:
    """Fraction of trials whose minimum required power exceeds the budget."""
    samples = min_power_samples(config, workers)
    return MonteCarloReport(config, outage=_outage_from_samples(samples, config.budgets))


def outage_probability(scheme, config: MonteCarloConfig, workers: int = 1) -> np.ndarray:
    return simulate_outage(config, workers).outage[Scheme(scheme).value]


def _sum_rate_chunk(config, start, stop, schemes):
    G = sample_gains(config, start, stop)
    K, r = config.num_users, config.min_rate
    budgets = config.budgets
    out = np.zeros((G.shape[0], len(SCHEMES), budgets.size))
    noma_min = _min_powers(G, r, 1.0).sum(axis=1)
    for k, P in enumerate(budgets):
        if Scheme.NOMA.value in schemes:
            ok = within_budget(noma_min, P)
            out[ok, 0, k] = K * r + excess_rate(P - noma_min[ok], G[ok, 0], 1.0, K * r)
        if Scheme.OMA1.value in schemes:
            out[:, 1, k] = oma1._sum_rate_batch(G, r, 1.0, P)
        if Scheme.OMA2.value in schemes:
            out[:, 2, k] = oma2._sum_rate_batch(G, r, 1.0, P, oma2.SHARE_FLOOR,
                                                oma2.MAX_ASCENT_ITERATIONS)
    return out


def sum_rate_samples(config: MonteCarloConfig, workers: int = 1,
                     schemes=SCHEMES) -> np.ndarray:
    """Instantaneous optimal sum rates, shape (trials, 3 schemes, SNR points).

    Trials in outage contribute 0. Schemes not requested are left at 0.
    """
    names = tuple(Scheme(s).value for s in schemes)
    return _run_chunks(_sum_rate_chunk, config, workers, names)


def simulate_ergodic(config: MonteCarloConfig, workers: int = 1,
                     schemes=SCHEMES) -> MonteCarloReport:
    """Average instantaneous optimal sum rate over the fading trials."""
    samples = sum_rate_samples(config, workers, schemes)
    means = samples.mean(axis=0)
    names = [Scheme(s).value for s in schemes]
    ergodic = {s.value: means[j] for j, s in enumerate(SCHEMES) if s.value in names}
    return MonteCarloReport(config, ergodic=ergodic)


def ergodic_sum_rate(scheme, config: MonteCarloConfig, workers: int = 1) -> np.ndarray:
    return simulate_ergodic(config, workers, schemes=(scheme,)).ergodic[Scheme(scheme).value]


def snr_at_outage(min_powers: np.ndarray, level: float, noise_power: float = 1.0) -> float:
    """SNR in dB at which the empirical outage probability equals ``level``.

    Outage at budget ``P`` is ``Pr{P* > P}``, so the crossing budget is the
    ``1 - level`` quantile of the sampled minimum powers.
    """
    if not 0 < level < 1:
        raise InvalidInputError("outage level must lie in (0, 1)")
    return float(10.0 * np.log10(np.quantile(min_powers, 1.0 - level) / noise_power))
