"""Randomized invariant suite over small instances.

Each instance is checked for the cross-scheme ordering, the water-filling
optimality conditions, stationarity of the minimum-power shares, the
excess-rate bound and agreement with the coarse grid oracles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import EPS, ChannelRealization, SystemConfig, order_channels
from .noma import noma_min_power, noma_optimal
from .oma1 import _thresholds as _oma1_thresholds
from .oma1 import oma1_min_power, oma1_waterfill
from .oma2 import (_thresholds as _oma2_thresholds, oma2_min_power, oma2_optimal,
                   oma2_upper_bound, stationarity_multipliers)
from .oracle import (GridSpec, NoFeasiblePointError, oracle_noma_sum_rate,
                     oracle_oma2_min_power, sandwich_suite)
from .waterfill import _solution

__all__ = [
    "KKT_TOL",
    "Instance",
    "VerifyReport",
    "random_instance",
    "waterfill_kkt_violation",
    "stationarity_violation",
    "check_instance",
    "run_verification",
]

logger = logging.getLogger(__name__)

KKT_TOL = 1e-6
ORACLE_STEP = 0.05


@dataclass(frozen=True)
class Instance:
    config: SystemConfig
    channel: ChannelRealization

    def describe(self) -> str:
        c = self.config
        gains = ",".join(f"{x:.12g}" for x in self.channel.gains)
        return f"gains=[{gains}] rstar={c.min_rate:.12g} P={c.total_power:.12g} N0={c.noise_power:.12g}"


@dataclass
class VerifyReport:
    instances: int
    failures: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures


def random_instance(rng: np.random.Generator, max_users: int = 3) -> Instance:
    """Gains log-uniform in [0.01, 100], ``r*`` uniform in [0, 2] and a
    budget between half and fifty times the NOMA minimum power."""
    K = int(rng.integers(1, max_users + 1))
    channel = order_channels(10.0 ** rng.uniform(-2.0, 2.0, K))
    r = float(rng.uniform(0.0, 2.0))
    floor = noma_min_power(channel, r, 1.0)
    P = max(floor, 1e-3) * 10.0 ** rng.uniform(np.log10(0.5), np.log10(50.0))
    return Instance(SystemConfig(P, 1.0, r, K), channel)


def waterfill_kkt_violation(thresholds, weights, budget, powers, level) -> float:
    """Largest relative breach of the water-filling optimality conditions.

    Active users must sit exactly at the level, inactive users at or above
    it, and the powers must spend the whole budget.
    """
    thresholds = np.asarray(thresholds, float)
    weights = np.asarray(weights, float)
    powers = np.asarray(powers, float)
    if budget <= 0:
        return float(np.max(np.abs(powers), initial=0.0))
    active = powers > 0
    # each power is w (level - t), so its rounding error scales with w level
    scale = max(budget, float(np.sum(weights[active])) * level)
    worst = abs(powers.sum() - budget) / scale
    if active.any():
        filled = powers[active] / weights[active] + thresholds[active]
        worst = max(worst, float(np.max(np.abs(filled - level))) / level)
    if (~active).any():
        worst = max(worst, float(np.max((level - thresholds[~active]) / level, initial=0.0)))
    return worst


def stationarity_violation(shares, channel, min_rate, noise_power) -> float:
    """Relative spread of the per-user multipliers at the minimum-power shares."""
    if min_rate == 0 or channel.num_users == 1:
        return 0.0
    lam = stationarity_multipliers(shares, channel, min_rate, noise_power)
    return float((lam.max() - lam.min()) / np.abs(lam).max())


def check_instance(inst: Instance, flip: bool = False) -> list:
    """Names of the checks that fail on ``inst``."""
    cfg, ch = inst.config, inst.channel
    K, r, N0, P = cfg.num_users, cfg.min_rate, cfg.noise_power, cfg.total_power
    failed = []

    sandwich = sandwich_suite(cfg, ch, flip=flip)
    failed += [f"sandwich:{name}" for name in sandwich.failures]

    p_o1 = oma1_min_power(ch, r, N0)
    if p_o1 < P:
        wf = oma1_waterfill(cfg, ch, P - p_o1)
        t = _oma1_thresholds(ch.gains, r, N0)
        if waterfill_kkt_violation(t, np.ones(K), P - p_o1, wf.excess_powers,
                                   wf.water_level) > KKT_TOL:
            failed.append("kkt:oma1-waterfill")

    p_o2, shares = oma2_min_power(ch, r, N0)
    if stationarity_violation(shares.fractions, ch, r, N0) > KKT_TOL:
        failed.append("kkt:oma2-stationarity")

    report = oma2_optimal(cfg, ch)
    if report.feasible:
        alpha = report.allocation.bandwidth_fractions
        t = _oma2_thresholds(alpha, ch.gains, r, N0)
        spare = P - float(np.sum(N0 * alpha * np.expm1(r / alpha) / ch.gains))
        wf = _solution(t, alpha, max(spare, 0.0), 1.0)
        if waterfill_kkt_violation(t, alpha, max(spare, 0.0), wf.excess_powers,
                                   wf.water_level) > KKT_TOL:
            failed.append("kkt:oma2-waterfill")
        bound = oma2_upper_bound(cfg, ch, p_o2)
        if report.sum_rate - K * r > bound + EPS:
            failed.append("bound:oma2-excess")

    if K > 1:
        grid = GridSpec(ORACLE_STEP)
        noma = noma_optimal(cfg, ch)
        try:
            coarse = oracle_noma_sum_rate(cfg, ch, grid)
            if coarse > noma.sum_rate + EPS * max(1.0, noma.sum_rate):
                failed.append("oracle:noma-sum-rate")
        except NoFeasiblePointError:
            pass
        coarse_p = oracle_oma2_min_power(ch, r, N0, grid)
        if coarse_p < p_o2 * (1.0 - EPS):
            failed.append("oracle:oma2-min-power")
    return failed


def run_verification(instances: int, seed: int, flip: bool = False,
                     max_users: int = 3) -> VerifyReport:
    """Run :func:`check_instance` on ``instances`` random instances."""
    rng = np.random.default_rng(seed)
    report = VerifyReport(instances)
    if instances == 0:
        logger.warning("no instances requested; the verification passes vacuously")
    for i in range(instances):
        inst = random_instance(rng, max_users)
        failed = check_instance(inst, flip=flip)
        for name in failed:
            report.checks[name] = report.checks.get(name, 0) + 1
        if failed:
            report.failures.append((i, inst.describe(), failed))
    return report
