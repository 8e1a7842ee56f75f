"""Bundled ground-truth domains with train/test problems and size checks."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .ground import applicable, apply_outcome, ground_domain
from .ppddl import DomainSpec, ProblemSpec, parse_domain, parse_problem

BENCHMARK_ROOT_ENV = "CAPLEARN_BENCHMARKS"

_DEFAULT_ROOT = Path(__file__).parent / "benchmarks"

BENCHMARK_NAMES = ("driver", "cafe", "warehouse", "first_responder", "elevator")


class BenchmarkError(Exception):
    pass


@dataclass(frozen=True)
class BenchmarkEntry:
    name: str
    domain: DomainSpec
    train: ProblemSpec
    tests: tuple
    expected_predicates: int
    expected_capabilities: int


def benchmark_root(root=None) -> Path:
    if root is not None:
        return Path(root)
    env = os.environ.get(BENCHMARK_ROOT_ENV)
    return Path(env) if env else _DEFAULT_ROOT


def load_manifest(root=None) -> dict:
    path = benchmark_root(root) / "manifest.json"
    with open(path) as fh:
        return json.load(fh)


def load_benchmark(name: str, root=None) -> BenchmarkEntry:
    manifest = load_manifest(root)
    if name not in manifest:
        raise BenchmarkError(f"unknown benchmark '{name}' (have: {sorted(manifest)})")
    base = benchmark_root(root)
    meta = manifest[name]
    domain = parse_domain((base / meta["domain"]).read_text())
    train = parse_problem((base / meta["train"]).read_text(), domain)
    tests = tuple(
        parse_problem((base / t).read_text(), domain) for t in meta["tests"]
    )
    if len(domain.predicates) != meta["predicates"]:
        raise BenchmarkError(
            f"{name}: predicate count {len(domain.predicates)} != expected {meta['predicates']}"
        )
    if len(domain.capabilities) != meta["capabilities"]:
        raise BenchmarkError(
            f"{name}: capability count {len(domain.capabilities)} != expected {meta['capabilities']}"
        )
    if len(train.objects) > 7:
        raise BenchmarkError(f"{name}: training problem has {len(train.objects)} > 7 objects")
    return BenchmarkEntry(
        name, domain, train, tests, meta["predicates"], meta["capabilities"]
    )


def reachable_states(domain: DomainSpec, problem: ProblemSpec, limit: int = 5000) -> list:
    """Breadth-first closure of the ground-truth transition system."""
    grounded = list(ground_domain(domain, problem.objects).values())
    seen = {problem.init}
    queue = [problem.init]
    while queue and len(seen) < limit:
        state = queue.pop(0)
        for cap in grounded:
            if not applicable(state, cap):
                continue
            for outcome in cap.outcomes:
                nxt = apply_outcome(state, outcome)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
                    if len(seen) >= limit:
                        break
    return sorted(seen, key=sorted)


def verify_identifiability(entry: BenchmarkEntry, limit: int = 5000) -> dict:
    """For each capability, a reachable state from which every outcome yields
    a distinct successor, or None when no such witness exists."""
    states = reachable_states(entry.domain, entry.train, limit)
    grounded = list(ground_domain(entry.domain, entry.train.objects).values())
    witnesses = {}
    for cap_name in entry.domain.capabilities:
        witness = None
        for state in states:
            for cap in grounded:
                if cap.name != cap_name or not applicable(state, cap):
                    continue
                succs = [apply_outcome(state, o) for o in cap.outcomes]
                if len(set(succs)) == len(succs):
                    witness = (state, cap.args)
                    break
            if witness:
                break
        witnesses[cap_name] = witness
    return witnesses
