"""Command line front end: ``decolens run`` and ``decolens presets``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .errors import ConfigError, DecolensError, NumericalError
from .harness import ExperimentConfig, parse_config, run_experiment
from .presets import PRESETS, resolve

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decolens", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True, help="key = value config file")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--runs", type=int, help="override the ensemble size")
    run.add_argument("--out", help="output directory")
    run.add_argument("--format", choices=("csv", "json"), help="output format")
    run.add_argument("--workers", type=int, help="parallel worker processes")
    sub.add_parser("presets", help="list presets with their parameter blocks")
    return parser


def _list_presets(out) -> None:
    for p in PRESETS.values():
        print(f"{p.name}: {p.title} (default runs {p.runs})", file=out)
        for key, value in sorted(resolve(p.defaults).items()):
            print(f"    {key} = {value!r}" if isinstance(value, str) else f"    {key} = {value:.10g}", file=out)


def _config(args) -> ExperimentConfig:
    try:
        with open(args.config, "rb") as fh:
            cfg = parse_config(fh.read())
    except OSError as err:
        raise ConfigError(f"cannot read config {args.config}: {err.strerror}") from err
    changes = {
        k: v
        for k, v in (("seed", args.seed), ("runs", args.runs), ("out_dir", args.out), ("format", args.format), ("workers", args.workers))
        if v is not None
    }
    return replace(cfg, **changes) if changes else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "presets":
        _list_presets(sys.stdout)
        return 0
    try:
        cfg = _config(args)
        manifest = run_experiment(cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DecolensError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {len(manifest.files)} files and manifest.json to {manifest.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
