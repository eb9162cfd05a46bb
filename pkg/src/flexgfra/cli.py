"""Command line entry point.

    flexgfra run --config desk.toml [--seed S] [--out results.csv]
                 [--algorithms vb-fusion,genie] [--trials N] [--threads N]
    flexgfra validate --config desk.toml
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .harness import THREADS_ENV, emit_csv, emit_plotdata, resolve_threads, run_experiment


def _parser():
    p = argparse.ArgumentParser(prog="flexgfra",
                                description="Variable-length-pilot grant-free access simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a power sweep and write CSV + plot data")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, help="override experiment.master_seed")
    run.add_argument("--out", help="override experiment.output_path")
    run.add_argument("--algorithms", help="comma-separated subset of vb-fusion,vb-nofusion,genie")
    run.add_argument("--trials", type=int, help="override experiment.trials_per_point")
    run.add_argument("--threads", type=int,
                     help=f"worker processes (default: ${THREADS_ENV} or 1)")
    run.add_argument("--timing", action="store_true",
                     help="fill the wall_time_s column (breaks byte-identical reruns)")
    run.add_argument("-v", "--verbose", action="store_true")

    val = sub.add_parser("validate", help="check a configuration file without running")
    val.add_argument("--config", required=True)
    return p


def _apply_overrides(cfg, args):
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.out is not None:
        changes["output_path"] = args.out
    if args.algorithms is not None:
        changes["algorithms"] = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
    if args.trials is not None:
        changes["trials_per_point"] = args.trials
    return dataclasses.replace(cfg, **changes) if changes else cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok ({len(cfg.p_max_sweep_mw)} power points x "
                  f"{cfg.trials_per_point} trials, algorithms {','.join(cfg.algorithms)})")
            return 0
        cfg = _apply_overrides(cfg, args)
        threads = resolve_threads(args.threads)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    records = run_experiment(cfg, threads=threads)
    out = Path(cfg.output_path)
    try:
        emit_csv(records, out, include_timing=args.timing)
        emit_plotdata(records, out.with_name(out.stem + "_plot"))
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return 1
    for r in records:
        print(f"{r.algorithm:12s} P_max={r.p_max_mw:7.1f} mW  P(MD)={_pct(r.p_md)}  "
              f"NMSE={_db(r.nmse_db)}  time={r.wall_time_s:.1f}s")
    print(f"wrote {out}")
    return 0


def _pct(x):
    return "   n/a" if x is None else f"{100 * x:6.2f}%"


def _db(x):
    return "   n/a" if x is None else f"{x:6.2f} dB"


if __name__ == "__main__":
    sys.exit(main())
