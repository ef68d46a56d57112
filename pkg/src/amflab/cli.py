"""Command-line interface.

Subcommands:
    run <config.json> [--out PATH] [--threads K] [--seed S] [--plot] [--figdir DIR]
    oracle [--seed S]
    list-experiments
    version

Exit codes: 0 success, 1 configuration error, 2 numerical failure.  Errors
are printed to stderr with the machine-parsable prefix ``ERROR <code>:``.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import __version__
from .bench import EXPERIMENTS, load_config, oracle_checks, run_experiment, write_csv
from .exceptions import AmfLabError, ConfigError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amflab",
        description="Adaptive matched filtering laboratory for superimposed "
        "pilot-plus-data waveforms in clutter.",
    )
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="run a configured experiment")
    run_p.add_argument("config", help="path to a JSON configuration file")
    run_p.add_argument("--out", help="output CSV path (overrides the config)")
    run_p.add_argument("--threads", type=int, default=1, help="worker threads")
    run_p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    run_p.add_argument("--plot", action="store_true",
                       help="render a PNG figure next to the CSV")
    run_p.add_argument("--figdir", help="directory for rendered figures")

    oracle_p = sub.add_parser("oracle", help="run the desk-scale oracle checks")
    oracle_p.add_argument("--seed", type=int, default=1)

    sub.add_parser("list-experiments", help="print registered experiment names")
    sub.add_parser("version", help="print the package version")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out=args.out)
    if cfg.out is None:
        raise ConfigError("no output path: set 'out' in the config or pass --out")
    rows = run_experiment(cfg, threads=max(1, args.threads))
    write_csv(rows, cfg.out)
    print(f"wrote {len(rows)} rows to {cfg.out}")
    if args.plot:
        from .report import render_figure

        figdir = args.figdir or os.path.dirname(os.path.abspath(cfg.out))
        os.makedirs(figdir, exist_ok=True)
        base = os.path.splitext(os.path.basename(cfg.out))[0]
        figpath = os.path.join(figdir, base + ".png")
        render_figure(cfg.experiment, rows, figpath)
        print(f"wrote figure to {figpath}")
    return 0


def _cmd_oracle(seed: int) -> int:
    failures = 0
    for name, value, threshold, ok in oracle_checks(seed):
        status = "ok" if ok else "FAIL"
        print(f"{status:4s} {name}: value={value:.3e} threshold={threshold:.1e}")
        failures += 0 if ok else 1
    if failures:
        print(f"{failures} oracle check(s) failed", file=sys.stderr)
        return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 1
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "oracle":
            return _cmd_oracle(args.seed)
        if args.command == "list-experiments":
            for name in EXPERIMENTS:
                print(name)
            return 0
        if args.command == "version":
            print(__version__)
            return 0
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"ERROR 1: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ERROR 1: {exc}", file=sys.stderr)
        return 1
    except AmfLabError as exc:
        print(f"ERROR 2: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
