"""Brute-force and generic-solver cross-checks for small instances.

Nothing here reuses the closed forms or the share search. The grid oracles
scan the raw problems directly, and the ``*_numerical`` solvers hand the raw
problems to SLSQP. They are meant for ``K <= 3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .model import (EPS, ChannelRealization, InvalidInputError, SystemConfig,
                    within_budget)
from .noma import excess_rate, noma_min_power, noma_optimal
from .oma1 import oma1_min_power, oma1_optimal
from .oma2 import oma2_min_power, oma2_optimal

__all__ = [
    "GridSpec",
    "NoFeasiblePointError",
    "SandwichReport",
    "oracle_noma_sum_rate",
    "noma_grid_slack",
    "oracle_oma2_min_power",
    "oracle_oma2_sum_rate",
    "noma_numerical",
    "oma1_numerical",
    "sandwich_suite",
]

MAX_ORACLE_USERS = 3


class NoFeasiblePointError(RuntimeError):
    """No grid point satisfies the minimum-rate constraint."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid in normalized coordinates.

    For power grids the coordinates are fractions of the budget ``P``; for
    share grids they are the bandwidth fractions themselves.
    """

    resolution: float
    bounds: tuple = (0.0, 1.0)

    def __post_init__(self):
        if not self.resolution > 0:
            raise InvalidInputError("grid resolution must be positive")
        lo, hi = self.bounds
        if not lo <= hi:
            raise InvalidInputError("grid bounds must be non-empty")

    def axis(self) -> np.ndarray:
        lo, hi = self.bounds
        n = int(np.floor((hi - lo) / self.resolution + 1e-9))
        return lo + self.resolution * np.arange(n + 1)


def _check_small(K: int) -> None:
    if K > MAX_ORACLE_USERS:
        raise InvalidInputError(f"grid oracles support at most {MAX_ORACLE_USERS} users")


def _simplex_points(axis: np.ndarray, dims: int) -> np.ndarray:
    """All grid points with ``dims`` coordinates and coordinate sum <= 1."""
    if dims == 0:
        return np.zeros((1, 0))
    mesh = np.meshgrid(*([axis] * dims), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts[pts.sum(axis=1) <= 1.0 + 1e-12]


def oracle_noma_sum_rate(config: SystemConfig, channel: ChannelRealization,
                         grid: GridSpec) -> float:
    """Grid maximum of the NOMA sum rate subject to ``min_i r_i >= r*``.

    Users ``1..K-1`` take grid fractions of the budget and user ``K`` takes the
    remainder: its power interferes with nobody, so spending the rest on it
    never hurts.
    """
    K = config.num_users
    _check_small(K)
    channel.check_users(K)
    P, N0, r = config.total_power, config.noise_power, config.min_rate
    g = channel.gains
    head = _simplex_points(grid.axis(), K - 1) * P
    powers = np.concatenate([head, P - head.sum(axis=1, keepdims=True)], axis=1)
    powers = np.maximum(powers, 0.0)
    interference = np.cumsum(powers, axis=1) - powers
    rates = np.log1p(powers * g / (N0 + g * interference))
    ok = rates.min(axis=1) >= r * (1.0 - 1e-12)
    if not ok.any():
        raise NoFeasiblePointError("no grid point meets the minimum rate")
    return float(rates[ok].sum(axis=1).max())


def noma_grid_slack(config: SystemConfig, channel: ChannelRealization,
                    grid: GridSpec) -> float:
    """Allowance for the sum-rate shortfall of the NOMA power grid.

    Rounding a stronger user's power onto the grid wastes up to ``h P`` of
    budget, and every weaker user must then add ``e^{r*} - 1`` times the extra
    interference to hold its rate. The allowance charges the compounded
    waste ``h P sum_{i<K} e^{i r*}`` against the strongest user's excess.
    It is a heuristic allowance, checked empirically rather than proven.
    """
    K, r, P = config.num_users, config.min_rate, config.total_power
    lost = grid.resolution * P * np.sum(np.exp(r * np.arange(K)))
    excess = P - noma_min_power(channel, r, config.noise_power)
    full = excess_rate(excess, channel.gains[0], config.noise_power, K * r)
    return float(full - excess_rate(excess - lost, channel.gains[0],
                                    config.noise_power, K * r))


def _min_power_grid(channel, min_rate, noise_power, grid):
    K = channel.num_users
    head = _simplex_points(grid.axis(), K - 1)
    alpha = np.concatenate([head, 1.0 - head.sum(axis=1, keepdims=True)], axis=1)
    alpha = alpha[np.all(alpha > 0, axis=1)]
    with np.errstate(over="ignore"):
        cost = noise_power * np.sum(alpha * np.expm1(min_rate / alpha) / channel.gains,
                                    axis=1)
    return alpha, cost


def oracle_oma2_min_power(channel: ChannelRealization, min_rate: float,
                          noise_power: float, grid: GridSpec) -> float:
    """Smallest minimum-power objective over a grid of share vectors."""
    _check_small(channel.num_users)
    _, cost = _min_power_grid(channel, min_rate, noise_power, grid)
    return float(cost.min())


def _weighted_fill(thresholds, weights, budget):
    # bisection on the water level, independent of the exact sorted solve
    lo = thresholds.min()
    hi = lo + budget / weights.min() + 1.0
    while np.sum(weights * np.maximum(hi - thresholds, 0.0)) < budget:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sum(weights * np.maximum(mid - thresholds, 0.0)) < budget:
            lo = mid
        else:
            hi = mid
    level = 0.5 * (lo + hi)
    active = thresholds < level
    return float(np.sum(weights[active] * np.log(level / thresholds[active])))


def oracle_oma2_sum_rate(config: SystemConfig, channel: ChannelRealization,
                         grid: GridSpec) -> float:
    """Best OMA-TYPE-II sum rate over a share grid, water-filling each point."""
    K = config.num_users
    _check_small(K)
    channel.check_users(K)
    P, N0, r = config.total_power, config.noise_power, config.min_rate
    alpha, cost = _min_power_grid(channel, r, N0, grid)
    keep = within_budget(cost, P)
    if not keep.any():
        raise NoFeasiblePointError("no share vector on the grid is feasible")
    best = -np.inf
    for a, c in zip(alpha[keep], cost[keep]):
        t = N0 * np.exp(r / a) / channel.gains
        best = max(best, _weighted_fill(t, a, P - c) if P > c else 0.0)
    return K * r + best


def _best_slsqp(objective, rates, min_rate, budget, starts):
    # log-power variables keep tiny optimal powers well conditioned
    cons = [{"type": "ineq", "fun": lambda z: 1.0 - np.exp(z).sum() / budget},
            {"type": "ineq", "fun": lambda z: rates(z) - min_rate}]
    best = -np.inf
    for z0 in starts:
        res = minimize(objective, z0, method="SLSQP", constraints=cons,
                       options={"ftol": 1e-15, "maxiter": 3000})
        z = res.x
        if (np.all(rates(z) >= min_rate - 1e-9)
                and np.exp(z).sum() <= budget * (1.0 + 1e-9)):
            best = max(best, float(rates(z).sum()))
    return best


def noma_numerical(config: SystemConfig, channel: ChannelRealization) -> float | None:
    """Generic numeric solve of the NOMA sum-rate problem; None if infeasible.

    SLSQP over log-powers, started from the minimum-power split scaled up to
    the budget (feasible: a common scale factor never lowers an SINR) and
    from an equal split.
    """
    channel.check_users(config.num_users)
    P, N0, r, K = config.total_power, config.noise_power, config.min_rate, config.num_users
    g = channel.gains
    mins = np.empty_like(g)
    acc = 0.0
    for i in range(K):
        mins[i] = np.expm1(r) * (N0 / g[i] + acc)
        acc += mins[i]
    if not within_budget(acc, P):
        return None

    def rates(z):
        p = np.exp(z)
        return np.log1p(p * g / (N0 + g * (np.cumsum(p) - p)))

    starts = [np.log(np.full(K, P / K))]
    if acc > 0:
        starts.insert(0, np.log(mins * P / acc))
    return _best_slsqp(lambda z: -rates(z).sum(), rates, r, P, starts)


def oma1_numerical(config: SystemConfig, channel: ChannelRealization) -> float | None:
    """Generic numeric solve of the equal-share OMA problem; None if infeasible."""
    channel.check_users(config.num_users)
    P, N0, r, K = config.total_power, config.noise_power, config.min_rate, config.num_users
    g = channel.gains
    if not within_budget(oma1_min_power(channel, r, N0), P):
        return None

    def rates(z):
        return np.log1p(K * np.exp(z) * g / N0) / K

    inverse = (1.0 / g) / np.sum(1.0 / g)
    starts = [np.log(inverse * P), np.log(np.full(K, P / K))]
    return _best_slsqp(lambda z: -rates(z).sum(), rates, r, P, starts)


@dataclass
class SandwichReport:
    """Outcome of the cross-scheme ordering checks on one instance.

    ``margins`` maps each inequality to ``larger - smaller``; a check fails
    when its margin is below ``-EPS`` times the larger magnitude.
    """

    passed: bool
    min_powers: dict
    sum_rates: dict
    margins: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)


def sandwich_suite(config: SystemConfig, channel: ChannelRealization,
                   tol: float = EPS, flip: bool = False) -> SandwichReport:
    """Check ``P_N* <= P_O2* <= P_O1*`` and, when all feasible,
    ``R_N >= R_O2 >= R_O1``.

    ``flip`` reverses every inequality; it exists to self-test the harness.
    """
    r, N0 = config.min_rate, config.noise_power
    p = {"NOMA": noma_min_power(channel, r, N0),
         "OMA1": oma1_min_power(channel, r, N0),
         "OMA2": oma2_min_power(channel, r, N0)[0]}
    pairs = [("P_O2-P_N", p["OMA2"], p["NOMA"]), ("P_O1-P_O2", p["OMA1"], p["OMA2"])]
    reports = {"NOMA": noma_optimal(config, channel),
               "OMA1": oma1_optimal(config, channel),
               "OMA2": oma2_optimal(config, channel)}
    rates = {k: v.sum_rate for k, v in reports.items()}
    if all(v.feasible for v in reports.values()):
        pairs += [("R_N-R_O2", rates["NOMA"], rates["OMA2"]),
                  ("R_O2-R_O1", rates["OMA2"], rates["OMA1"])]
    report = SandwichReport(True, p, rates)
    for name, big, small in pairs:
        if flip:
            big, small = small, big
        margin = big - small
        report.margins[name] = margin
        if margin < -tol * max(1.0, abs(big), abs(small)):
            report.failures.append(name)
    report.passed = not report.failures
    return report

