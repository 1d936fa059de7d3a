"""Command-line entry point.

Exit codes: 0 success, 1 a check failed, 2 invalid configuration, 3 training
diverged (non-finite loss).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import checks
from .config import SEED_ENV, ConfigError, load_config
from .pipeline import TrainingDiverged
from .runner import run_experiment

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV, "").strip()
    try:
        return int(env) if env else 0
    except ValueError:
        raise ConfigError(SEED_ENV, f"expected an integer, got {env!r}") from None


def _report(results: list[checks.Check]) -> int:
    for c in results:
        print(c.line())
    failed = sum(not c.passed for c in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


def _load(path):
    try:
        return load_config(path)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return None
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return None


def cmd_run(args) -> int:
    loaded = _load(args.config)
    if loaded is None:
        return EXIT_CONFIG
    cfg, out = loaded
    try:
        rows, _ = run_experiment(cfg, out)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"wrote {len(rows)} rows to {out / 'results.csv'}")
    return EXIT_OK


def cmd_shaping(args) -> int:
    loaded = _load(args.config)
    if loaded is None:
        return EXIT_CONFIG
    cfg, out = loaded
    try:
        _, reports = run_experiment(replace(cfg, methods=("jcm",)), out)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    for snr in sorted(reports):
        r = reports[snr]
        print(f"{snr:g} dB: nu={r.nu:.4f} KL(fit)={r.kl_mb:.4f} KL(uniform)={r.kl_uniform:.4f}")
    return _report(checks.shaping_checks(reports))


def cmd_gradcheck(args) -> int:
    return _report(checks.gradient_checks(_seed(args)))


def cmd_oraclecheck(args) -> int:
    return _report(checks.oracle_checks(_seed(args)))


def cmd_sample_dist(args) -> int:
    if args.order < 2 or args.draws < 1 or args.pmfs < 1:
        print("order must be at least 2, draws and pmfs positive", file=sys.stderr)
        return EXIT_CONFIG
    return _report(checks.sampling_checks(args.order, args.draws, args.pmfs, _seed(args),
                                          args.tol))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jcm", description="Learned constellation mapping experiments")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train and evaluate every (method, SNR, seed) cell")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("shaping", help="train the learned modulator and fit symbol-usage shaping")
    s.add_argument("config")
    s.set_defaults(func=cmd_shaping)

    for name, func, help_ in (("gradcheck", cmd_gradcheck, "backprop vs finite differences"),
                              ("oraclecheck", cmd_oraclecheck, "lower-bound and score-function oracle")):
        c = sub.add_parser(name, help=help_)
        c.add_argument("--seed", type=int, default=None)
        c.set_defaults(func=func)

    d = sub.add_parser("sample-dist", help="Gumbel-max sampling frequencies vs target PMFs")
    d.add_argument("--order", type=int, default=16)
    d.add_argument("--draws", type=int, default=100_000)
    d.add_argument("--pmfs", type=int, default=20)
    d.add_argument("--tol", type=float, default=0.01)
    d.add_argument("--seed", type=int, default=None)
    d.set_defaults(func=cmd_sample_dist)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
