"""Command-line entry points: learn, baseline, eval, validate."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .benchmarks import (
    BENCHMARK_NAMES,
    BenchmarkError,
    load_benchmark,
    verify_identifiability,
)
from .evaluate import approx_vd, exact_vd, pinsker_check, structural_diff
from .experiment import ConfigError, ExperimentConfig, run_experiment
from .ppddl import (
    ParseError,
    domain_to_str,
    parse_domain,
    parse_problem,
    problem_to_str,
)
from .simulator import make_test_set

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _parse_seeds(text: str) -> tuple:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return tuple(seeds)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--domain", required=True, choices=BENCHMARK_NAMES)
    p.add_argument("--seeds", default="0", help="e.g. '1..30' or '1,2,5'")
    p.add_argument("--eta", type=int, default=5)
    p.add_argument("--node-budget", type=int, default=10**6)
    p.add_argument("--walk-limit", type=int, default=500)
    p.add_argument("--replay-target", type=int, default=1000)
    p.add_argument("--snapshot-every", type=int, default=2000)
    p.add_argument("--test-samples", type=int, default=3500)
    p.add_argument("--out", default="results")
    p.add_argument("--benchmark-root", default="")
    p.add_argument("--curve", action="store_true",
                   help="evaluate variational distance on every snapshot")


def _config(args, **overrides) -> ExperimentConfig:
    cfg = ExperimentConfig(
        domain=args.domain,
        seeds=_parse_seeds(args.seeds),
        eta=args.eta,
        node_budget=args.node_budget,
        walk_limit=args.walk_limit,
        replay_target=args.replay_target,
        snapshot_every=args.snapshot_every,
        test_samples=args.test_samples,
        out_dir=args.out,
        benchmark_root=args.benchmark_root,
        curve=args.curve,
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    cfg.validate()
    return cfg


def cmd_learn(args) -> int:
    cfg = _config(args)
    summary = run_experiment(cfg, baseline=False)
    for r in summary["results"]:
        print(f"{r['domain']} seed={r['seed']} steps={r['sdma_steps']} "
              f"queries={r['queries_issued']} diff={r['structural_diff_size']} "
              f"exact_vd={r['exact_vd']:.4f}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _config(args, step_budget=args.step_budget)
    summary = run_experiment(cfg, baseline=True)
    for r in summary["results"]:
        print(f"{r['domain']} seed={r['seed']} learner={r['learner']} "
              f"steps={r['sdma_steps']} diff={r['structural_diff_size']}")
    return EXIT_OK


def cmd_eval(args) -> int:
    entry = load_benchmark(args.domain, args.benchmark_root or None)
    test = make_test_set(entry.domain, entry.tests, args.test_samples, 424242)
    reports = []
    for path in args.models:
        try:
            model = parse_domain(Path(path).read_text())
        except (OSError, ParseError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        diff = structural_diff(entry.domain, model)
        ev = exact_vd(entry.domain, model, test)
        av = approx_vd(model, test)
        pk_ok, pk_checked, pk_skipped = pinsker_check(entry.domain, model, test)
        report = {
            "model": str(path),
            "exact_vd": round(ev, 6),
            "approx_vd": round(av, 6),
            "structural_diff_size": diff.size,
            "structural_diff": diff.describe(),
            "pinsker_holds": pk_ok,
            "pinsker_checked": pk_checked,
            "pinsker_skipped": pk_skipped,
            "sample_count": len(test),
        }
        reports.append(report)
        print(f"{path}: exact_vd={ev:.4f} approx_vd={av:.4f} diff={diff.size}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{args.domain}_eval.json", "w") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
    return EXIT_OK


def cmd_validate(args) -> int:
    root = args.benchmark_root or None
    failures = 0
    for name in BENCHMARK_NAMES:
        try:
            entry = load_benchmark(name, root)
        except (BenchmarkError, ParseError, OSError) as exc:
            print(f"FAIL {name}: {exc}")
            failures += 1
            continue
        issues = []
        round_tripped = parse_domain(domain_to_str(entry.domain))
        if round_tripped != entry.domain:
            issues.append("domain round-trip mismatch")
        for prob in (entry.train,) + entry.tests:
            if parse_problem(problem_to_str(prob), entry.domain) != prob:
                issues.append(f"problem round-trip mismatch: {prob.name}")
        for prob in entry.tests:
            if len(prob.objects) != 2 * len(entry.train.objects):
                issues.append(
                    f"{prob.name}: {len(prob.objects)} objects, "
                    f"want {2 * len(entry.train.objects)}"
                )
        witnesses = verify_identifiability(entry)
        for cap, w in sorted(witnesses.items()):
            if w is None:
                issues.append(f"no identifiability witness for {cap}")
        if issues:
            failures += 1
            print(f"FAIL {name}: " + "; ".join(issues))
        else:
            print(f"ok {name}: |P|={entry.expected_predicates} "
                  f"|C|={entry.expected_capabilities}")
    return EXIT_OK if failures == 0 else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caplearn",
        description="Learn and evaluate probabilistic capability models of "
                    "black-box agents",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="run the active learner over seeds")
    _add_common(p)
    p.set_defaults(fn=cmd_learn)

    p = sub.add_parser("baseline", help="run learner plus random baseline")
    _add_common(p)
    p.add_argument("--step-budget", type=int, default=0,
                   help="baseline simulator steps (0: match the learner)")
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("eval", help="evaluate learned model files")
    p.add_argument("--domain", required=True, choices=BENCHMARK_NAMES)
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--test-samples", type=int, default=3500)
    p.add_argument("--out", default="results")
    p.add_argument("--benchmark-root", default="")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("validate", help="check bundled benchmarks")
    p.add_argument("--benchmark-root", default="")
    p.set_defaults(fn=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BenchmarkError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
