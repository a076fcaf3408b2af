"""Acceptance criteria, one test each.

Every test prints a single ``[PASS]`` or ``[FAIL]`` line with the measured
quantities before asserting, so ``pytest -v -s`` (or the captured output of
a failing run) shows the outcome of each criterion at its tolerance.
"""

import time

import numpy as np
import pytest

from nomaopt.cli import main
from nomaopt.fading import MonteCarloConfig, min_power_samples, simulate_ergodic, snr_at_outage
from nomaopt.model import EPS, SystemConfig, order_channels
from nomaopt.noma import noma_min_power, noma_optimal
from nomaopt.oma1 import _thresholds as oma1_thresholds
from nomaopt.oma1 import oma1_min_power, oma1_optimal, oma1_waterfill
from nomaopt.oma2 import (_thresholds as oma2_thresholds, oma2_min_power, oma2_optimal,
                          oma2_upper_bound)
from nomaopt.oracle import GridSpec, noma_grid_slack, oracle_noma_sum_rate
from nomaopt.verify import stationarity_violation, waterfill_kkt_violation
from nomaopt.waterfill import _solution


@pytest.fixture
def report(capsys):
    def emit(number, title, passed, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {number}: {title}: {detail}")
        assert passed, detail
    return emit


def random_gains(rng, K):
    return order_channels(10.0 ** rng.uniform(-2.0, 2.0, K))


@pytest.fixture(scope="module")
def feasible_instances():
    """1000 instances with every scheme feasible (budget above P_O1*)."""
    rng = np.random.default_rng(3)
    out = []
    for _ in range(1000):
        K = int(rng.integers(2, 6))
        ch = random_gains(rng, K)
        r = float(rng.uniform(0.1, 2.0))
        P = oma1_min_power(ch, r, 1.0) * 10.0 ** rng.uniform(0.0, 2.0)
        out.append((SystemConfig(P, 1.0, r, K), ch))
    return out


def test_closed_form_matches_grid_oracle(report):
    rng = np.random.default_rng(1)
    grid = GridSpec(0.005)
    start = time.perf_counter()
    worst, bad = 0.0, 0
    for _ in range(100):
        ch = random_gains(rng, 3)
        r = float(rng.uniform(0.1, 2.0))
        cfg = SystemConfig(2.0 * noma_min_power(ch, r, 1.0), 1.0, r, 3)
        exact = noma_optimal(cfg, ch).sum_rate
        gap = exact - oracle_noma_sum_rate(cfg, ch, grid)
        slack = noma_grid_slack(cfg, ch, grid)
        bad += not (-EPS * exact <= gap <= slack)
        worst = max(worst, gap / slack)
    elapsed = time.perf_counter() - start
    report(1, "closed form vs grid oracle", bad == 0 and elapsed < 120,
           f"100 instances, {bad} outside slack, worst gap/slack {worst:.3f}, {elapsed:.1f}s")


def test_min_power_chain(report):
    rng = np.random.default_rng(2)
    violations = not_strict = 0
    for _ in range(10_000):
        K = int(rng.integers(2, 7))
        ch = random_gains(rng, K)
        r = float(rng.uniform(0.0, 2.0))
        p_n = noma_min_power(ch, r, 1.0)
        p_o2 = oma2_min_power(ch, r, 1.0)[0]
        p_o1 = oma1_min_power(ch, r, 1.0)
        violations += p_n > p_o2 * (1 + EPS) or p_o2 > p_o1 * (1 + EPS)
        distinct = np.all(np.diff(ch.gains) < 0)
        if distinct and r > 0:
            not_strict += not (p_n < p_o2 < p_o1)
    report(2, "P_N* <= P_O2* <= P_O1*", violations == 0 and not_strict == 0,
           f"10000 instances, {violations} violations, {not_strict} non-strict with distinct gains")


def test_sum_rate_chain(report, feasible_instances):
    violations = 0
    for cfg, ch in feasible_instances:
        r_n = noma_optimal(cfg, ch).sum_rate
        r_o2 = oma2_optimal(cfg, ch).sum_rate
        r_o1 = oma1_optimal(cfg, ch).sum_rate
        violations += r_n < r_o2 * (1 - EPS) or r_o2 < r_o1 * (1 - EPS)
    report(3, "R_N >= R_O2 >= R_O1", violations == 0,
           f"{len(feasible_instances)} feasible instances, {violations} violations")


def test_equality_conditions(report):
    worst_o1 = worst_o2 = 0.0
    for K in (2, 3, 5):
        for gain in (0.3, 1.0, 20.0):
            ch = order_channels(np.full(K, gain))
            for r in (0.5, 1.0):
                for snr in np.arange(0.0, 61.0, 2.0):
                    cfg = SystemConfig.from_snr_db(snr, r, K)
                    r_n = noma_optimal(cfg, ch).sum_rate
                    worst_o1 = max(worst_o1, abs(r_n - oma1_optimal(cfg, ch).sum_rate))
                    worst_o2 = max(worst_o2, abs(r_n - oma2_optimal(cfg, ch).sum_rate))
    rng = np.random.default_rng(4)
    zero_ok = True
    for _ in range(200):
        ch = random_gains(rng, int(rng.integers(1, 7)))
        zero_ok &= (noma_min_power(ch, 0.0, 1.0) == 0.0 and oma1_min_power(ch, 0.0, 1.0) == 0.0
                    and oma2_min_power(ch, 0.0, 1.0)[0] == 0.0)
    passed = worst_o1 <= 1e-6 and worst_o2 <= 1e-4 and zero_ok
    report(4, "equality with equal gains and at r*=0", passed,
           f"max|R_N-R_O1| {worst_o1:.2e}, max|R_N-R_O2| {worst_o2:.2e}, "
           f"zero minimum powers at r*=0: {zero_ok}")


def test_excess_rate_bound(report, feasible_instances):
    violations, worst = 0, -np.inf
    for cfg, ch in feasible_instances:
        excess = oma2_optimal(cfg, ch).sum_rate - cfg.num_users * cfg.min_rate
        margin = excess - oma2_upper_bound(cfg, ch)
        violations += margin > 1e-9
        worst = max(worst, margin)
    report(5, "OMA2 excess-rate bound", violations == 0,
           f"{len(feasible_instances)} instances, {violations} violations, "
           f"max excess-bound {worst:.3e}")


@pytest.mark.slow
def test_outage_gaps_three_users(report):
    start = time.perf_counter()
    cfg = MonteCarloConfig(3, 1.0, (0.0,), 100_000, 2024)
    samples = min_power_samples(cfg)
    elapsed = time.perf_counter() - start
    snr = [snr_at_outage(samples[:, j], 0.1) for j in range(3)]
    o1_to_o2, o2_to_n = snr[1] - snr[2], snr[2] - snr[0]
    passed = abs(o1_to_o2 - 1.5) <= 0.5 and abs(o2_to_n - 2.5) <= 0.5 and elapsed < 300
    report(6, "outage gaps at 1e-1, K=3, r*=1", passed,
           f"OMA1->OMA2 {o1_to_o2:.2f} dB (1.5+-0.5), OMA2->NOMA {o2_to_n:.2f} dB (2.5+-0.5), "
           f"{elapsed:.1f}s")


@pytest.mark.slow
def test_ergodic_gaps_three_users(report):
    cfg = MonteCarloConfig(3, 1.0, (50.0,), 10_000, 2024)
    e = simulate_ergodic(cfg).ergodic
    n_o2 = float(e["NOMA"][0] - e["OMA2"][0])
    o2_o1 = float(e["OMA2"][0] - e["OMA1"][0])
    passed = abs(n_o2 - 0.3) <= 0.15 and abs(o2_o1 - 0.7) <= 0.2
    report(7, "ergodic gaps at 50 dB, K=3, r*=1", passed,
           f"NOMA-OMA2 {n_o2:.3f} (0.3+-0.15), OMA2-OMA1 {o2_o1:.3f} (0.7+-0.2) nats")


@pytest.mark.slow
def test_ergodic_six_users_at_46_db(report):
    cfg = MonteCarloConfig(6, 2.0, (46.0,), 10_000, 2024)
    e = {k: float(v[0]) for k, v in simulate_ergodic(cfg).ergodic.items()}
    passed = e["OMA1"] < 1 and e["OMA2"] < 1 and e["NOMA"] > 5
    report(8, "ergodic rates at 46 dB, K=6, r*=2", passed,
           f"NOMA {e['NOMA']:.3f} (>5), OMA1 {e['OMA1']:.3f} (<1), OMA2 {e['OMA2']:.3f} (<1)")


@pytest.mark.slow
def test_outage_csv_deterministic(report, tmp_path, capsys):
    argv = ["outage", "--users", "3", "--rstar", "1", "--snr-grid", "0:40:2", "--seed", "77"]
    paths = []
    for run, workers in enumerate((1, 1, 2)):
        path = tmp_path / f"run{run}.csv"
        assert main(argv + ["--workers", str(workers), "--out", str(path)]) == 0
        paths.append(path.read_bytes())
    capsys.readouterr()
    passed = paths[0] == paths[1] == paths[2]
    report(9, "outage CSV byte-identical", passed,
           f"two single-worker runs and one two-worker run, 100000 trials, "
           f"identical: {passed}")


def test_kkt_suites(report):
    rng = np.random.default_rng(5)
    worst = {"oma1-waterfill": 0.0, "oma2-waterfill": 0.0, "oma2-stationarity": 0.0}
    for _ in range(1000):
        K = int(rng.integers(2, 6))
        ch = random_gains(rng, K)
        r = float(rng.uniform(0.1, 2.0))
        P = oma1_min_power(ch, r, 1.0) * 10.0 ** rng.uniform(0.0, 2.0)
        cfg = SystemConfig(P, 1.0, r, K)

        budget = P - oma1_min_power(ch, r, 1.0)
        wf = oma1_waterfill(cfg, ch, budget)
        v = waterfill_kkt_violation(oma1_thresholds(ch.gains, r, 1.0), np.ones(K), budget,
                                    wf.excess_powers, wf.water_level)
        worst["oma1-waterfill"] = max(worst["oma1-waterfill"], v)

        alpha = oma2_optimal(cfg, ch).allocation.bandwidth_fractions
        t = oma2_thresholds(alpha, ch.gains, r, 1.0)
        spare = max(P - float(np.sum(alpha * np.expm1(r / alpha) / ch.gains)), 0.0)
        wf2 = _solution(t, alpha, spare, 1.0)
        v = waterfill_kkt_violation(t, alpha, spare, wf2.excess_powers, wf2.water_level)
        worst["oma2-waterfill"] = max(worst["oma2-waterfill"], v)

        shares = oma2_min_power(ch, r, 1.0)[1].fractions
        worst["oma2-stationarity"] = max(worst["oma2-stationarity"],
                                         stationarity_violation(shares, ch, r, 1.0))
    passed = max(worst.values()) <= 1e-6
    report(10, "KKT suites", passed,
           "1000 instances, worst relative residuals "
           + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
