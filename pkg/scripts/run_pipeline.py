#!/usr/bin/env python3
"""Train the full generation stack once and score guided vs unguided
sampling under both label plans."""

import argparse
import sys

from flowlab.config import default_config
from flowlab.experiments import run_pipeline


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--steps", type=int, default=1500)
    parser.add_argument("--guidance-scale", type=float, default=1.5)
    parser.add_argument("--shift", action="store_true", help="enable the schedule shift")
    parser.add_argument("--out", default="out/pipeline")
    args = parser.parse_args()

    cfg = default_config("pipeline")
    cfg.seeds = (args.seed,)
    cfg.train.steps = args.steps
    cfg.guidance.scale = args.guidance_scale
    cfg.flow.shift.enabled = args.shift
    cfg.out = args.out

    report = run_pipeline(cfg, cfg.out)
    print(report.to_text())
    return 3 if report.any_fail else 0


if __name__ == "__main__":
    sys.exit(main())
