"""Command-line entry point: ``fdcoalition --config exp.cfg --output out.csv``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (ConfigError, parse_config, parse_sweep, run_experiment,
                      schemes_arg, write_results)

EXIT_CONFIG = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fdcoalition",
        description="Sub-channel allocation sweeps for full-duplex D2D mmWave small cells.",
    )
    ap.add_argument("--config", type=Path, help="flat key = value experiment file")
    ap.add_argument("--seed", type=int, help="master seed")
    ap.add_argument("--trials", type=int, help="trials per sweep point")
    ap.add_argument("--schemes", help="comma list of fd-coalition,hd-coalition,random,optimal")
    ap.add_argument("--sweep", help="var=v1,v2,... with var one of n_d2d, n_access, "
                                    "num_channels, si_magnitude, r_min (Mbit/s)")
    ap.add_argument("--output", type=Path, help="result file (stdout when omitted)")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--workers", type=int, help="parallel trial workers")
    ap.add_argument("--verify-stability", action="store_true",
                    help="re-audit Nash stability of every coalition-formation result")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials: must be >= 1")
            changes["trials"] = args.trials
        if args.schemes:
            changes["schemes"] = tuple(schemes_arg(args.schemes))
        if args.sweep:
            changes["sweep_variable"], changes["sweep_values"] = parse_sweep(args.sweep)
        if args.output is not None:
            changes["output"] = str(args.output)
        if args.format:
            changes["format"] = args.format
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers: must be >= 1")
            changes["workers"] = args.workers
        if args.verify_stability:
            changes["verify_stability"] = True
        cfg = replace(cfg, **changes)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    rs = run_experiment(cfg, write=False)
    if cfg.output:
        try:
            write_results(rs, cfg.format, cfg.output)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        from .harness import to_csv, to_json

        sys.stdout.write(to_csv(rs) if cfg.format == "csv" else to_json(rs))
    if rs.failures:
        print(f"{len(rs.failures)} trial(s) failed or skipped; see log", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
