#!/usr/bin/env python3
"""Run the recovery benchmark and print the per-forecaster summary.

The default scale (20 systems, 500 paths) finishes in a couple of
minutes on a laptop; --full switches to the complete 200-system
protocol with 1000-path ensembles.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sdeverse.harness import ExperimentConfig, run_recovery


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--full", action="store_true",
                   help="run the complete 200-system protocol")
    p.add_argument("--systems", type=int, default=20)
    p.add_argument("--level", type=int, default=7)
    p.add_argument("--paths", type=int, default=500,
                   help="oracle and forecast ensemble size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=8)
    p.add_argument("--strict", action="store_true",
                   help="drop fallback fits from summary aggregates")
    p.add_argument("--out", default="results/benchmark")
    return p.parse_args()


def main():
    args = parse_args()
    if args.full:
        config = ExperimentConfig(root_seed=args.seed, output_dir=args.out,
                                  thread_count=args.threads)
    else:
        config = ExperimentConfig(
            root_seed=args.seed,
            n_systems=args.systems,
            level=args.level,
            n_oracle_paths=args.paths,
            n_forecast_paths=args.paths,
            output_dir=args.out,
            thread_count=args.threads,
        )

    t0 = time.perf_counter()
    result = run_recovery(config, strict=args.strict)
    elapsed = time.perf_counter() - t0

    print(f"scored {result.n_scored}/{config.n_systems} systems "
          f"in {elapsed:.1f}s ({config.thread_count} threads)")
    for failure in result.failures:
        print(f"  failed {failure['system_id']} at {failure['stage']}: "
              f"{failure['message']}")

    header = f"{'forecaster':<24}{'energy':>12}{'marginal':>12}{'crps_sum':>12}{'gap%':>8}"
    print()
    print(header)
    print("-" * len(header))
    for row in result.summary_rows:
        if row["horizon"] != "avg":
            continue
        if not row["energy"]:
            print(f"{row['forecaster_id']:<24}{'(no scored systems)':>44}")
            continue
        gap = row["energy_gap_vs_best_baseline_pct"]
        gap_txt = f"{float(gap):>8.1f}" if gap else f"{'':>8}"
        print(f"{row['forecaster_id']:<24}"
              f"{float(row['energy']):>12.4f}"
              f"{float(row['marginal_energy']):>12.4f}"
              f"{float(row['crps_sum']):>12.4f}" + gap_txt)
    print(f"\ntables and plots in {result.output_dir}")
    return 0 if result.n_failed == 0 else 2


if __name__ == "__main__":
    sys.exit(main())
