#!/usr/bin/env python3
"""Run the schedule-shift and noise-augmentation ablations back to back."""

import argparse
import sys

from flowlab.config import default_config
from flowlab.experiments import run_noiseaug_ablation, run_schedule_ablation


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--out", default="out/ablations")
    parser.add_argument("--skip-schedule", action="store_true")
    parser.add_argument("--skip-noiseaug", action="store_true")
    args = parser.parse_args()
    seeds = tuple(int(s) for s in args.seeds.split(","))

    failed = False
    if not args.skip_schedule:
        cfg = default_config("schedule_ablation")
        cfg.seeds = seeds
        cfg.flow.shift.enabled = True
        report = run_schedule_ablation(cfg, f"{args.out}/schedule")
        print(report.to_text())
        failed |= report.any_fail
    if not args.skip_noiseaug:
        cfg = default_config("noiseaug_ablation")
        cfg.seeds = seeds
        report = run_noiseaug_ablation(cfg, f"{args.out}/noiseaug")
        print(report.to_text())
        failed |= report.any_fail
    return 3 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
