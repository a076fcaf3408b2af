"""Command-line front end: deterministic curves, fading experiments, verification.

Every table goes to ``--out`` as CSV (or to stdout without ``--out``). With
``--out`` a ``<basename>.manifest.json`` sidecar records how to rerun it, and
``--plot`` also renders ``<basename>.png``.

Exit codes: 0 on success, 1 when an invariant check fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .fading import (DEFAULT_ERGODIC_TRIALS, DEFAULT_OUTAGE_TRIALS, SCHEMES,
                     MonteCarloConfig, simulate_ergodic, simulate_outage)
from .model import EPS, InvalidInputError, SystemConfig, order_channels
from .noma import noma_min_power, noma_optimal
from .oma1 import oma1_min_power, oma1_optimal
from .oma2 import oma2_min_power, oma2_optimal
from .oracle import noma_numerical
from .verify import run_verification

logger = logging.getLogger("nomaopt")

SEED_ENV = "NOMA_ALLOC_SEED"
EXIT_OK, EXIT_INVARIANT, EXIT_USAGE = 0, 1, 2
NUMERICAL_TOL = 1e-4
SCHEME_NAMES = [s.value for s in SCHEMES]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- parsing

def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (stop included when on the grid) or ``a,b,c``."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if not step > 0 or stop < start:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9))
            values = start + step * np.arange(n + 1)
        else:
            values = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed grid {text!r}") from None
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise argparse.ArgumentTypeError(f"grid {text!r} must be finite and non-empty")
    # strip accumulated float noise so CSV rows read back cleanly
    return np.array([float(f"{v:.12g}") for v in values])


def parse_gains(text: str) -> np.ndarray:
    try:
        values = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed gains {text!r}") from None
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise argparse.ArgumentTypeError("gains must be finite and positive")
    return values


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(value) and value >= 0):
        raise argparse.ArgumentTypeError("must be finite and non-negative")
    return value


def _positive_float(text: str) -> float:
    value = _non_negative_float(text)
    if value == 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def resolve_seed(flag_value) -> int:
    """The ``--seed`` flag wins over the environment; the default is 0."""
    if flag_value is not None:
        return flag_value
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        seed = int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if not 0 <= seed < 2 ** 64:
        raise UsageError(f"{SEED_ENV} must be a 64-bit unsigned integer")
    return seed


def _channel(args):
    gains = args.gains if args.gains_are_power else args.gains ** 2
    return order_channels(gains)


# ---------------------------------------------------------------- output

def format_value(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, str):
        return v
    return f"{float(v):.12g}"


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _parameters(args) -> dict:
    out = {}
    for key, value in vars(args).items():
        if key in ("func", "plot", "out"):
            continue
        if isinstance(value, np.ndarray):
            value = value.tolist()
        out[key] = value
    return out


def write_outputs(args, header, rows, plot_spec=None) -> None:
    text = render_csv(header, rows)
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    manifest = {
        "command": args.command,
        "parameters": _parameters(args),
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "csv": out.name,
    }
    with open(out.with_suffix(".manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    if args.plot and plot_spec is not None:
        from .plotting import plot_table
        plot_table(out.with_suffix(".png"), **plot_spec)
    logger.info("wrote %s", out)


def _ordered(big, small) -> bool:
    return big >= small - EPS * max(1.0, abs(big), abs(small))


# ---------------------------------------------------------------- commands

def cmd_min_power(args) -> int:
    channel = _channel(args)
    rows, failures = [], 0
    for r in args.rstar_grid:
        if r < 0:
            raise UsageError("rstar values must be non-negative")
        p_n = noma_min_power(channel, r, args.noise)
        p_o1 = oma1_min_power(channel, r, args.noise)
        p_o2 = oma2_min_power(channel, r, args.noise)[0]
        if not (_ordered(p_o2, p_n) and _ordered(p_o1, p_o2)):
            logger.error("minimum-power ordering fails at rstar=%g", r)
            failures += 1
        rows.append([r, p_n, p_o1, p_o2])
    cols = np.array([row[1:] for row in rows], dtype=float)
    plot = dict(x=args.rstar_grid, columns=dict(zip(SCHEME_NAMES, cols.T)),
                xlabel="r* (nats/s/Hz)", ylabel="minimum required power", logy=True)
    write_outputs(args, ["rstar"] + SCHEME_NAMES, rows, plot)
    return EXIT_INVARIANT if failures else EXIT_OK


def cmd_sum_rate(args) -> int:
    channel = _channel(args)
    K = channel.num_users
    rows, failures = [], 0
    for snr in args.snr_grid:
        cfg = SystemConfig.from_snr_db(snr, args.rstar, K, args.noise)
        reports = [noma_optimal(cfg, channel), oma1_optimal(cfg, channel),
                   oma2_optimal(cfg, channel)]
        values = [rep.sum_rate if rep.feasible else math.nan for rep in reports]
        numerical = noma_numerical(cfg, channel) if reports[0].feasible else None
        numerical = math.nan if numerical is None else numerical
        outage = ";".join(rep.scheme.value for rep in reports if not rep.feasible)
        rows.append([snr, *values, numerical, outage])

        r_n, r_o1, r_o2 = values
        if reports[1].feasible and not (_ordered(r_n, r_o2) and _ordered(r_o2, r_o1)):
            logger.error("sum-rate ordering fails at snr=%g dB", snr)
            failures += 1
        if reports[0].feasible and not abs(numerical - r_n) <= NUMERICAL_TOL:
            logger.error("numerical NOMA solve is off by %.3g at snr=%g dB",
                         abs(numerical - r_n), snr)
            failures += 1
    cols = np.array([row[1:5] for row in rows], dtype=float)
    plot = dict(x=args.snr_grid,
                columns=dict(zip(SCHEME_NAMES + ["NOMA_numerical"], cols.T)),
                xlabel="SNR (dB)", ylabel="sum rate (nats/s/Hz)")
    write_outputs(args, ["snr_db"] + SCHEME_NAMES + ["NOMA_numerical", "outage"], rows, plot)
    return EXIT_INVARIANT if failures else EXIT_OK


def _mc_config(args) -> MonteCarloConfig:
    args.seed = resolve_seed(args.seed)
    trials = args.trials
    if trials is None:
        trials = DEFAULT_OUTAGE_TRIALS if args.command == "outage" else DEFAULT_ERGODIC_TRIALS
        args.trials = trials
    return MonteCarloConfig(args.users, args.rstar, tuple(args.snr_grid), trials, args.seed)


def _mc_rows(snr_grid, table):
    return [[snr, *(table[name][k] for name in SCHEME_NAMES)]
            for k, snr in enumerate(snr_grid)]


def cmd_outage(args) -> int:
    cfg = _mc_config(args)
    report = simulate_outage(cfg, workers=args.workers)
    failures = 0
    o = report.outage
    if np.any(o["NOMA"] > o["OMA2"]) or np.any(o["OMA2"] > o["OMA1"]):
        logger.error("outage ordering NOMA <= OMA2 <= OMA1 fails")
        failures += 1
    plot = dict(x=args.snr_grid, columns=o, xlabel="SNR (dB)",
                ylabel="outage probability", logy=True)
    write_outputs(args, ["snr_db"] + SCHEME_NAMES, _mc_rows(args.snr_grid, o), plot)
    return EXIT_INVARIANT if failures else EXIT_OK


def cmd_ergodic(args) -> int:
    cfg = _mc_config(args)
    report = simulate_ergodic(cfg, workers=args.workers)
    e = report.ergodic
    failures = 0
    if not all(_ordered(a, b) and _ordered(b, c)
               for a, b, c in zip(e["NOMA"], e["OMA2"], e["OMA1"])):
        logger.error("ergodic ordering NOMA >= OMA2 >= OMA1 fails")
        failures += 1
    plot = dict(x=args.snr_grid, columns=e, xlabel="SNR (dB)",
                ylabel="ergodic sum rate (nats/s/Hz)")
    write_outputs(args, ["snr_db"] + SCHEME_NAMES, _mc_rows(args.snr_grid, e), plot)
    return EXIT_INVARIANT if failures else EXIT_OK


def cmd_verify(args) -> int:
    seed = resolve_seed(args.seed)
    report = run_verification(args.instances, seed, flip=args.inject_fault)
    for index, desc, failed in report.failures:
        print(f"FAIL instance {index}: {', '.join(failed)} ({desc})")
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: {report.instances} instances, {len(report.failures)} failing, seed {seed}")
    return EXIT_OK if report.passed else EXIT_INVARIANT


# ---------------------------------------------------------------- wiring

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nomaopt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def output_flags(p):
        p.add_argument("--out", help="CSV path; a manifest sidecar is written next to it")
        p.add_argument("--plot", action="store_true", help="also render <basename>.png")

    def channel_flags(p):
        p.add_argument("--gains", type=parse_gains, required=True,
                       help="comma-separated channel amplitudes, e.g. 10,5,1")
        p.add_argument("--gains-are-power", action="store_true",
                       help="treat --gains as power gains instead of amplitudes")
        p.add_argument("--noise", type=_positive_float, default=1.0, help="noise power N0")

    p = sub.add_parser("min-power", help="minimum required power versus r*")
    channel_flags(p)
    p.add_argument("--rstar-grid", type=parse_grid, default=parse_grid("0:3:0.1"))
    output_flags(p)
    p.set_defaults(func=cmd_min_power)

    p = sub.add_parser("sum-rate", help="optimal sum rates versus SNR")
    channel_flags(p)
    p.add_argument("--rstar", type=_non_negative_float, default=1.0)
    p.add_argument("--snr-grid", type=parse_grid, default=parse_grid("0:40:2"))
    output_flags(p)
    p.set_defaults(func=cmd_sum_rate)

    for name, helptext, grid in (("outage", "outage probability under Rayleigh fading", "0:40:2"),
                                 ("ergodic", "ergodic sum rate under Rayleigh fading", "0:50:5")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--users", type=_positive_int, default=3)
        p.add_argument("--rstar", type=_non_negative_float, default=1.0)
        p.add_argument("--snr-grid", type=parse_grid, default=parse_grid(grid))
        p.add_argument("--trials", type=_positive_int, default=None)
        p.add_argument("--seed", type=_non_negative_int, default=None,
                       help=f"RNG seed (default: ${SEED_ENV} or 0)")
        p.add_argument("--workers", type=_positive_int, default=1)
        output_flags(p)
        p.set_defaults(func=cmd_outage if name == "outage" else cmd_ergodic)

    p = sub.add_parser("verify", help="randomized invariant suite on small instances")
    p.add_argument("--instances", type=_non_negative_int, default=10_000)
    p.add_argument("--seed", type=_non_negative_int, default=None)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if getattr(args, "plot", False) and args.out is None:
        parser.error("--plot requires --out")
    try:
        return args.func(args)
    except (UsageError, InvalidInputError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
