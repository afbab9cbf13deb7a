#!/usr/bin/env python3
"""Run the width-bound overfit sweep and print the report.

Equivalent to `flowlab overfit`, with the grid exposed as flags for quick
experimentation."""

import argparse
import sys

from flowlab.config import default_config
from flowlab.experiments import run_overfit_sweep


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--widths", default="16,32,64,96")
    parser.add_argument("--depths", default="4")
    parser.add_argument("--token-dim", type=int, default=64)
    parser.add_argument("--steps", type=int, default=1200)
    parser.add_argument("--targets", type=int, default=3)
    parser.add_argument("--seeds-per-target", type=int, default=3)
    parser.add_argument("--out", default="out/overfit")
    args = parser.parse_args()

    cfg = default_config("overfit_sweep")
    cfg.theory.widths = tuple(int(w) for w in args.widths.split(","))
    cfg.theory.depths = tuple(int(d) for d in args.depths.split(","))
    cfg.theory.token_dim = args.token_dim
    cfg.theory.steps = args.steps
    cfg.theory.targets = args.targets
    cfg.theory.seeds_per_target = args.seeds_per_target
    cfg.out = args.out

    report = run_overfit_sweep(cfg, cfg.out)
    print(report.to_text())
    return 3 if report.any_fail else 0


if __name__ == "__main__":
    sys.exit(main())
