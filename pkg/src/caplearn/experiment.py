"""Experiment runner: seeds x domains, CSV/JSON artifacts, reproducible."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .benchmarks import load_benchmark
from .evaluate import approx_vd, exact_vd, random_baseline, structural_diff
from .learner import ActiveLearner, LearnerConfig, Mode
from .ppddl import domain_to_str, parse_domain
from .simulator import Agent, make_test_set

EVAL_SEED = 424242
TEST_SAMPLES = 3500

CSV_FIELDS = ("domain", "seed", "learner", "sdma_steps", "queries_issued",
              "exact_vd", "approx_vd")


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    domain: str
    seeds: tuple
    eta: int = 5
    alpha_rule: str = "2d"
    node_budget: int = 10**6
    walk_limit: int = 500
    replay_target: int = 1000
    step_budget: int = 0  # baseline budget; 0 means "match the learner's steps"
    snapshot_every: int = 2000
    test_samples: int = TEST_SAMPLES
    eval_seed: int = EVAL_SEED
    out_dir: str = "results"
    benchmark_root: str = ""
    curve: bool = False  # evaluate VD on every snapshot, not just the final model

    def validate(self):
        if self.eta < 1:
            raise ConfigError("eta must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.alpha_rule != "2d":
            raise ConfigError(f"unsupported alpha rule '{self.alpha_rule}'")
        if self.replay_target < 0 or self.node_budget < 1 or self.walk_limit < 1:
            raise ConfigError("budgets must be positive")


def _learner_config(config: ExperimentConfig) -> LearnerConfig:
    return LearnerConfig(
        attempts=config.eta,
        node_budget=config.node_budget,
        walk_limit=config.walk_limit,
        replay_target=config.replay_target,
        snapshot_every=config.snapshot_every,
    )


@dataclass
class SeedResult:
    domain: str
    seed: int
    learner: str
    model_text: str
    sdma_steps: int
    queries_issued: int
    wall_time_s: float
    structural_diff_size: int
    structural_diff: str
    exact_vd: float
    approx_vd: float
    undetermined: int
    all_queries_distinguishing: bool
    rows: list = field(default_factory=list)  # snapshot CSV rows
    audit: list = field(default_factory=list)
    diagnostics: tuple = ()


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def benchmark_and_test_set(config: ExperimentConfig):
    root = config.benchmark_root or None
    entry = load_benchmark(config.domain, root)
    test = make_test_set(entry.domain, entry.tests, config.test_samples, config.eval_seed)
    return entry, test


def run_learner_seed(config: ExperimentConfig, seed: int, entry=None, test=None) -> SeedResult:
    if entry is None or test is None:
        entry, test = benchmark_and_test_set(config)
    agent = Agent(entry.domain, entry.train, seed)
    learner = ActiveLearner(agent, _learner_config(config))
    t0 = time.perf_counter()
    model = learner.learn()
    wall = time.perf_counter() - t0
    learned_domain = model.to_domain(entry.domain.name)
    diff = structural_diff(entry.domain, learned_domain)
    ev = exact_vd(entry.domain, learned_domain, test)
    av = approx_vd(learned_domain, test)
    rows = []
    for steps, queries, text in learner.snapshots:
        if (steps, queries) == (agent.step_count, learner.queries_issued):
            continue  # the final row below covers it
        if not config.curve:
            continue
        snap_domain = parse_domain(text)
        rows.append({
            "domain": config.domain, "seed": seed, "learner": "active",
            "sdma_steps": steps, "queries_issued": queries,
            "exact_vd": _fmt(exact_vd(entry.domain, snap_domain, test)),
            "approx_vd": _fmt(approx_vd(snap_domain, test)),
        })
    rows.append({
        "domain": config.domain, "seed": seed, "learner": "active",
        "sdma_steps": agent.step_count, "queries_issued": learner.queries_issued,
        "exact_vd": _fmt(ev), "approx_vd": _fmt(av),
    })
    undetermined = sum(1 for m in model.annotations.values() if m is Mode.UNDETERMINED)
    return SeedResult(
        domain=config.domain, seed=seed, learner="active",
        model_text=domain_to_str(learned_domain),
        sdma_steps=agent.step_count, queries_issued=learner.queries_issued,
        wall_time_s=wall,
        structural_diff_size=diff.size, structural_diff=diff.describe(),
        exact_vd=ev, approx_vd=av, undetermined=undetermined,
        all_queries_distinguishing=learner.all_queries_distinguishing,
        rows=rows, audit=learner.audit, diagnostics=model.diagnostics,
    )


def run_baseline_seed(config: ExperimentConfig, seed: int, step_budget: int,
                      entry=None, test=None) -> SeedResult:
    if entry is None or test is None:
        entry, test = benchmark_and_test_set(config)
    agent = Agent(entry.domain, entry.train, seed)
    t0 = time.perf_counter()
    model = random_baseline(agent, step_budget, seed)
    wall = time.perf_counter() - t0
    learned_domain = model.to_domain(entry.domain.name)
    diff = structural_diff(entry.domain, learned_domain)
    ev = exact_vd(entry.domain, learned_domain, test)
    av = approx_vd(learned_domain, test)
    row = {
        "domain": config.domain, "seed": seed, "learner": "random_baseline",
        "sdma_steps": agent.step_count, "queries_issued": 0,
        "exact_vd": _fmt(ev), "approx_vd": _fmt(av),
    }
    return SeedResult(
        domain=config.domain, seed=seed, learner="random_baseline",
        model_text=domain_to_str(learned_domain),
        sdma_steps=agent.step_count, queries_issued=0, wall_time_s=wall,
        structural_diff_size=diff.size, structural_diff=diff.describe(),
        exact_vd=ev, approx_vd=av, undetermined=0,
        all_queries_distinguishing=True, rows=[row],
        diagnostics=model.diagnostics,
    )


def write_csv(path: Path, rows):
    lines = [",".join(CSV_FIELDS)]
    for row in rows:
        lines.append(",".join(str(row[f]) for f in CSV_FIELDS))
    path.write_text("\n".join(lines) + "\n")


def run_experiment(config: ExperimentConfig, baseline: bool = False) -> dict:
    """Runs all seeds of one domain; writes learned models, audit logs, the
    snapshot CSV, and a JSON summary. Returns the summary."""
    config.validate()
    entry, test = benchmark_and_test_set(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    all_rows = []
    summaries = []
    for seed in config.seeds:
        result = run_learner_seed(config, seed, entry, test)
        results = [result]
        if baseline:
            budget = config.step_budget or result.sdma_steps
            results.append(run_baseline_seed(config, seed, budget, entry, test))
        for r in results:
            tag = f"{config.domain}_{r.learner}_seed{seed}"
            (out / f"{tag}.pddl").write_text(r.model_text)
            if r.audit:
                with open(out / f"{tag}_audit.jsonl", "w") as fh:
                    for rec in r.audit:
                        fh.write(json.dumps(rec, sort_keys=True) + "\n")
            all_rows.extend(r.rows)
            summaries.append({
                "domain": r.domain, "seed": r.seed, "learner": r.learner,
                "sdma_steps": r.sdma_steps, "queries_issued": r.queries_issued,
                "wall_time_s": round(r.wall_time_s, 3),
                "structural_diff_size": r.structural_diff_size,
                "exact_vd": r.exact_vd, "approx_vd": r.approx_vd,
                "undetermined": r.undetermined,
                "all_queries_distinguishing": r.all_queries_distinguishing,
            })
    write_csv(out / f"{config.domain}_snapshots.csv", all_rows)
    summary = {
        "domain": config.domain,
        "seeds": list(config.seeds),
        "eta": config.eta,
        "test_samples": config.test_samples,
        "results": summaries,
    }
    with open(out / f"{config.domain}_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary
