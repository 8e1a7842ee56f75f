#!/usr/bin/env python3
"""Full experiment sweep: every bundled domain, learner + budget-matched
random baseline, 30 seeds each; writes CSV curves, learned models, audit
logs, and per-domain JSON summaries under results/.

Usage:
    python scripts/run_experiments.py [--seeds 1..30] [--out results] [--curve]
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from caplearn.benchmarks import BENCHMARK_NAMES
from caplearn.cli import _parse_seeds
from caplearn.experiment import ExperimentConfig, run_experiment


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", default="1..30")
    ap.add_argument("--out", default="results")
    ap.add_argument("--domains", nargs="*", default=list(BENCHMARK_NAMES))
    ap.add_argument("--eta", type=int, default=5)
    ap.add_argument("--replay-target", type=int, default=1000)
    ap.add_argument("--curve", action="store_true")
    args = ap.parse_args()

    seeds = _parse_seeds(args.seeds)
    for domain in args.domains:
        cfg = ExperimentConfig(
            domain=domain,
            seeds=seeds,
            eta=args.eta,
            replay_target=args.replay_target,
            out_dir=args.out,
            curve=args.curve,
        )
        summary = run_experiment(cfg, baseline=True)
        exact = [r["structural_diff_size"] == 0 for r in summary["results"]
                 if r["learner"] == "active"]
        print(f"{domain}: {sum(exact)}/{len(exact)} seeds structurally exact")
    return 0


if __name__ == "__main__":
    sys.exit(main())
