"""Command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 runtime failure,
3 completed with at least one FAIL verdict in the report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import apply_overrides, default_config, parse_config
from .errors import ConfigError, ConfigParseError, FlowLabError
from .experiments import run_experiment

SUBCOMMANDS = {
    "overfit": "overfit_sweep",
    "pipeline": "pipeline",
    "generate": "generate",
    "verify-theory": "verify_theory",
    "metrics": "metrics",
    "convert-data": "convert_data",
    "schedule-ablation": "schedule_ablation",
    "noiseaug-ablation": "noiseaug_ablation",
}

USAGE = """usage: flowlab SUBCOMMAND [--config PATH] [--seed N] [--out DIR]
                [--override key=value ...]

subcommands:
  overfit            width-bound overfit sweep (point-mass protocol)
  verify-theory      spectral-oracle verification report
  pipeline           decoder + velocity model + guided generation + metrics
  schedule-ablation  shifted vs unshifted training comparison
  noiseaug-ablation  noise-augmented decoder comparison
  generate           sample images from a saved pipeline checkpoint
  metrics            score datasets with the Fréchet proxy
  convert-data       ingest 8-bit image grids into the dataset format

flags:
  --config PATH      config file ('default' or omitted = built-in defaults)
  --seed N           replace the config's seed list with [N]
  --out DIR          output directory for reports and artifacts
  --override k=v     override a config key (repeatable)
"""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="flowlab", add_help=False)
    parser.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    parser.add_argument("--config", default="default")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--override", action="append", default=[])
    parser.add_argument("--help", "-h", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv in (["--help"], ["-h"]):
        sys.stderr.write(USAGE)
        return 1
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"error: {exc}\n\n{USAGE}")
        return 1
    if args.help:
        sys.stderr.write(USAGE)
        return 1

    try:
        if args.config == "default":
            cfg = default_config(SUBCOMMANDS[args.subcommand])
        else:
            cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
            cfg.experiment = SUBCOMMANDS[args.subcommand]
        if args.seed is not None:
            cfg.seeds = (args.seed,)
        if args.out is not None:
            cfg.out = args.out
        if args.override:
            apply_overrides(cfg, args.override)
        cfg.experiment = SUBCOMMANDS[args.subcommand]
    except (ConfigParseError, ConfigError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1

    try:
        report = run_experiment(cfg)
    except (ConfigError, ConfigParseError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except FlowLabError as exc:
        sys.stderr.write(f"runtime error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 2
    sys.stdout.write(report.to_text())
    return 3 if report.any_fail else 0


if __name__ == "__main__":
    sys.exit(main())
