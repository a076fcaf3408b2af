"""OMA with jointly optimized powers and bandwidth shares.

Two nested problems:

* minimum power: ``min_alpha N0 sum_i phi(alpha_i) / g_i`` over the simplex,
  with ``phi(a) = a (e^{r*/a} - 1)`` strictly convex and decreasing. Its KKT
  system ``(N0/g_i) phi'(alpha_i) = lam`` is solved by bisection on ``lam``.
* sum rate: for fixed shares the excess power is water-filled with weights
  ``alpha_i``; the shares are then searched by projected-gradient ascent on
  the simplex from several starts.

The numerical kernels are compiled with numba so that the Monte Carlo layer
can call them per trial.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from .model import (EPS, FEASIBILITY_RTOL, Allocation, ChannelRealization,
                    InvalidInputError, RateReport, Scheme, SystemConfig,
                    oma_rate_vector, within_budget)
from .noma import excess_rate
from .waterfill import fill

__all__ = [
    "ShareVector",
    "InnerResult",
    "SHARE_FLOOR",
    "min_power_objective",
    "stationarity_multipliers",
    "oma2_min_power",
    "oma2_inner_power",
    "oma2_optimal",
    "oma2_upper_bound",
]

#: Lower bound on every share during the search; optima are interior.
SHARE_FLOOR = 1e-6
#: Each vertex start gives this share to the other users before renormalizing.
START_VERTEX_FLOOR = 1e-4
MAX_ASCENT_ITERATIONS = 2000


@dataclass(frozen=True)
class ShareVector:
    """Bandwidth fractions on the simplex."""

    fractions: np.ndarray

    def __post_init__(self):
        a = np.array(self.fractions, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise InvalidInputError("fractions must be a non-empty vector")
        if np.any(a <= 0) or abs(a.sum() - 1.0) > EPS * a.size:
            raise InvalidInputError("fractions must be positive and sum to one")
        a.flags.writeable = False
        object.__setattr__(self, "fractions", a)

    @classmethod
    def uniform(cls, num_users: int) -> "ShareVector":
        return cls(np.full(num_users, 1.0 / num_users))


class InnerResult(NamedTuple):
    feasible: bool
    excess_rate: float
    allocation: Optional[Allocation]


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def _psi(x):
    # phi'(a) expressed in x = r/a: e^x (1 - x) - 1 < 0 for x > 0
    if x < 0.1:
        term = 0.5 * x * x
        s = 0.0
        for n in range(2, 22):
            s += (n - 1) * term
            term *= x / (n + 1)
        return -s
    return np.exp(x) * (1.0 - x) - 1.0


@njit(cache=True)
def _psi_inv(c):
    # psi is decreasing and concave, so Newton started right of the root
    # descends monotonically onto it. Both starts below are right of it.
    a = -c
    if a < 1.0:
        x = np.sqrt(2.0 * a)
    else:
        x = 1.0 + np.log1p(a)
    for _ in range(200):
        f = _psi(x) - c
        if f == 0.0:
            break
        x_new = x + f / (x * np.exp(x))
        if x_new <= 0.0:
            x_new = 0.5 * x
        if abs(x_new - x) <= 1e-15 * x:
            x = x_new
            break
        x = x_new
    return x


@njit(cache=True)
def _shares_at(u, g, r, N0, out):
    # shares solving (N0/g_i) phi'(alpha_i) = -e^u; returns their sum
    s = 0.0
    for i in range(g.size):
        log_a = u + np.log(g[i] / N0)
        if log_a < -60.0:
            # psi(x) = -x^2/2 (1 + O(x)) with x < 1e-12 here; the share r/x
            # is formed in log space so a tiny r* cannot underflow x
            out[i] = np.exp(np.log(r) - 0.5 * (np.log(2.0) + log_a))
        else:
            out[i] = r / _psi_inv(-np.exp(log_a))
        s += out[i]
    return s


@njit(cache=True)
def _objective(alpha, g, r, N0):
    total = 0.0
    for i in range(g.size):
        total += alpha[i] * np.expm1(r / alpha[i]) / g[i]
    return N0 * total


@njit(cache=True)
def _min_power_kernel(g, r, N0):
    K = g.size
    alpha = np.full(K, 1.0 / K)
    if K == 1:
        return N0 * np.expm1(r) / g[0], alpha
    if r == 0.0:
        return 0.0, alpha
    # u = ln(-lam); the share sum decreases strictly in u
    lo, hi, step = -1.0, 1.0, 2.0
    while _shares_at(lo, g, r, N0, alpha) < 1.0 and lo > -4000.0:
        lo -= step
        step *= 2.0
    step = 2.0
    while _shares_at(hi, g, r, N0, alpha) > 1.0 and hi < 1400.0:
        hi += step
        step *= 2.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        s = _shares_at(mid, g, r, N0, alpha)
        if abs(s - 1.0) <= 1e-14:
            break
        if s > 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * max(1.0, abs(mid)):
            break
    alpha /= alpha.sum()
    kkt = _objective(alpha, g, r, N0)
    uniform = np.full(K, 1.0 / K)
    flat = _objective(uniform, g, r, N0)
    if flat < kkt:
        return flat, uniform
    return kkt, alpha


@njit(cache=True)
def _thresholds(alpha, g, r, N0):
    # N0 / hhat_i with hhat_i = g_i e^{-r/alpha_i}
    return np.exp(np.log(N0) - np.log(g) + r / alpha)


@njit(cache=True)
def _excess_budget(alpha, g, r, N0, P):
    b = P - _objective(alpha, g, r, N0)
    if b < 0.0 and b >= -FEASIBILITY_RTOL * P:
        b = 0.0
    return b


@njit(cache=True)
def _inner_value(alpha, g, r, N0, P):
    b = _excess_budget(alpha, g, r, N0, P)
    if not b >= 0.0:
        return -np.inf
    _, _, gain = fill(_thresholds(alpha, g, r, N0), alpha, b)
    return gain


@njit(cache=True)
def _project(v, floor):
    # Euclidean projection onto {a >= floor, sum a = 1}
    K = v.size
    mass = 1.0 - K * floor
    w = v - floor
    u = np.sort(w)[::-1]
    css = 0.0
    theta = 0.0
    for j in range(K):
        css += u[j]
        th = (css - mass) / (j + 1)
        if u[j] - th > 0.0:
            theta = th
    return np.maximum(w - theta, 0.0) + floor


@njit(cache=True)
def _gradient(alpha, value, g, r, N0, P):
    K = alpha.size
    grad = np.zeros(K)
    probe = alpha.copy()
    for i in range(K):
        h = 1e-6 * max(alpha[i], 1e-3)
        probe[i] = alpha[i] + h
        fp = _inner_value(probe, g, r, N0, P)
        probe[i] = alpha[i] - h
        fm = _inner_value(probe, g, r, N0, P)
        probe[i] = alpha[i]
        up = fp > -np.inf
        down = fm > -np.inf
        if up and down:
            grad[i] = (fp - fm) / (2.0 * h)
        elif up:
            grad[i] = (fp - value) / h
        elif down:
            grad[i] = (value - fm) / h
    return grad


@njit(cache=True)
def _ascend(alpha, g, r, N0, P, floor, max_iter):
    # projected gradient with Barzilai-Borwein trial steps and Armijo
    # backtracking; monotone, so the start value is never lost
    # the caller hands in a feasible point already on the floored simplex
    value = _inner_value(alpha, g, r, N0, P)
    grad = _gradient(alpha, value, g, r, N0, P)
    step = -1.0
    for _ in range(max_iter):
        gmax = np.max(np.abs(grad))
        if gmax == 0.0:
            break
        if step <= 0.0:
            step = 0.1 / gmax
        accepted = False
        cand = alpha
        cand_value = value
        for _ls in range(80):
            cand = _project(alpha + step * grad, floor)
            d = cand - alpha
            if np.max(np.abs(d)) < 1e-15:
                break
            cand_value = _inner_value(cand, g, r, N0, P)
            if cand_value >= value + 1e-4 * np.dot(grad, d):
                accepted = True
                break
            step *= 0.5
        if not accepted or cand_value < value:
            break
        gain = cand_value - value
        cand_grad = _gradient(cand, cand_value, g, r, N0, P)
        s_vec = cand - alpha
        y_vec = cand_grad - grad
        curvature = -np.dot(s_vec, y_vec)
        step = np.dot(s_vec, s_vec) / curvature if curvature > 0.0 else -1.0
        alpha = cand
        value = cand_value
        grad = cand_grad
        if gain <= 1e-13 * max(1.0, abs(value)) and np.max(np.abs(s_vec)) < 1e-9:
            break
    return alpha, value


@njit(cache=True)
def _pull_inside(start, anchor, g, r, N0, P):
    # walk from start towards the minimum-power shares until feasible. The
    # power objective is convex, so backing off to 99% of the feasible part
    # of the segment leaves a strictly positive excess budget.
    if _inner_value(start, g, r, N0, P) > -np.inf:
        return start
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _inner_value(anchor + mid * (start - anchor), g, r, N0, P) > -np.inf:
            lo = mid
        else:
            hi = mid
    return anchor + 0.99 * lo * (start - anchor)


@njit(cache=True)
def _lex_less(a, b):
    for i in range(a.size):
        if a[i] < b[i]:
            return True
        if a[i] > b[i]:
            return False
    return False


@njit(cache=True)
def _optimal_kernel(g, r, N0, P, anchor, floor, max_iter):
    # multi-start ascent: uniform shares, then one start per perturbed vertex
    K = g.size
    if K == 1:
        one = np.ones(1)
        return one, _inner_value(one, g, r, N0, P)
    best_alpha = np.full(K, 1.0 / K)
    best_value = -np.inf
    anchor = _project(anchor, floor)
    for s in range(K + 1):
        if s == 0:
            start = np.full(K, 1.0 / K)
        else:
            start = np.full(K, START_VERTEX_FLOOR)
            start[s - 1] = 1.0
            start /= start.sum()
        start = _pull_inside(_project(start, floor), anchor, g, r, N0, P)
        alpha, value = _ascend(start, g, r, N0, P, floor, max_iter)
        if value > best_value or (value == best_value and _lex_less(alpha, best_alpha)):
            best_alpha = alpha
            best_value = value
    return best_alpha, best_value


@njit(cache=True)
def _min_power_batch(G, r, N0):
    out = np.empty(G.shape[0])
    for t in range(G.shape[0]):
        out[t], _ = _min_power_kernel(G[t], r, N0)
    return out


@njit(cache=True)
def _sum_rate_batch(G, r, N0, P, floor, max_iter):
    # row-wise optimal sum rate; 0 for rows in outage
    T, K = G.shape
    out = np.zeros(T)
    for t in range(T):
        p_min, anchor = _min_power_kernel(G[t], r, N0)
        if p_min > P * (1.0 + FEASIBILITY_RTOL):
            continue
        _, value = _optimal_kernel(G[t], r, N0, P, anchor, floor, max_iter)
        out[t] = K * r + max(value, 0.0)
    return out


# ---------------------------------------------------------------------------
# public API


def min_power_objective(shares, channel: ChannelRealization, min_rate: float,
                        noise_power: float) -> float:
    """Total power needed to give every user ``min_rate`` on ``shares``."""
    a = np.asarray(shares, dtype=float)
    return float(_objective(a, channel.gains, float(min_rate), float(noise_power)))


def stationarity_multipliers(shares, channel: ChannelRealization, min_rate: float,
                             noise_power: float) -> np.ndarray:
    """``(N0/g_i) phi'(alpha_i)``; all equal at the minimum-power shares."""
    a = np.asarray(shares, dtype=float)
    psi = np.array([_psi(min_rate / ai) for ai in a])
    return noise_power / channel.gains * psi


def oma2_min_power(channel: ChannelRealization, min_rate: float,
                   noise_power: float) -> tuple[float, ShareVector]:
    """Minimum total power over bandwidth shares, with the minimizing shares.

    With ``min_rate == 0`` every share vector needs zero power; uniform
    shares are returned.
    """
    power, alpha = _min_power_kernel(channel.gains, float(min_rate), float(noise_power))
    return float(power), ShareVector(alpha)


def _inner(alpha: np.ndarray, config: SystemConfig, channel: ChannelRealization):
    g, r, N0 = channel.gains, config.min_rate, config.noise_power
    budget = _excess_budget(alpha, g, r, N0, config.total_power)
    if not budget >= 0.0:
        return InnerResult(False, float("-inf"), None)
    _, excess, gain = fill(_thresholds(alpha, g, r, N0), alpha, budget)
    powers = N0 * alpha * np.expm1(r / alpha) / g + excess
    rates = oma_rate_vector(powers, alpha, channel, N0)
    return InnerResult(True, float(gain), Allocation(powers, alpha, rates))


def oma2_inner_power(shares, config: SystemConfig,
                     channel: ChannelRealization) -> InnerResult:
    """Best excess rate for fixed bandwidth shares.

    Every user first receives its minimum power on its share; the rest is
    water-filled with powers ``alpha_i [1/lam - N0/hhat_i]^+`` where
    ``hhat_i = g_i e^{-r*/alpha_i}``.
    """
    channel.check_users(config.num_users)
    if not isinstance(shares, ShareVector):
        shares = ShareVector(shares)
    return _inner(shares.fractions, config, channel)


def oma2_optimal(config: SystemConfig, channel: ChannelRealization) -> RateReport:
    """Optimal OMA-TYPE-II sum rate over powers and bandwidth shares.

    The share search is a projected-gradient ascent (finite-difference
    gradients, backtracking) started from uniform shares and from each
    perturbed simplex vertex; the best local result is kept.
    """
    channel.check_users(config.num_users)
    g, r, N0, P = channel.gains, config.min_rate, config.noise_power, config.total_power
    p_min, anchor = _min_power_kernel(g, r, N0)
    if not within_budget(p_min, P):
        return RateReport(Scheme.OMA2, False, float(p_min), 0.0, None)
    alpha, _ = _optimal_kernel(g, r, N0, P, anchor, SHARE_FLOOR, MAX_ASCENT_ITERATIONS)
    inner = _inner(alpha, config, channel)
    if not inner.feasible:
        # only reachable for P within rounding of the minimum power
        inner = _inner(anchor, config, channel)
    K = config.num_users
    return RateReport(Scheme.OMA2, True, float(p_min),
                      K * r + max(inner.excess_rate, 0.0), inner.allocation)


def oma2_upper_bound(config: SystemConfig, channel: ChannelRealization,
                     min_power: float | None = None) -> float:
    """Upper bound ``ln(1 + (P - P_O2*) g_1 / (e^{K r*} N0))`` on the excess rate.

    ``min_power`` overrides ``P_O2*``, e.g. to evaluate the bound at ``P_N*``.
    """
    if min_power is None:
        min_power, _ = oma2_min_power(channel, config.min_rate, config.noise_power)
    return float(excess_rate(config.total_power - min_power, channel.gains[0],
                             config.noise_power, config.num_users * config.min_rate))
