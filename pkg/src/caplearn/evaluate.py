"""Learned-model quality metrics and the random-exploration baseline."""
from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .ground import apply_outcome, bind_capability
from .learner import LearnedModel
from .ppddl import DomainSpec, conjunction_literals, holds
from .simulator import Agent, canonical_outcomes


@dataclass(frozen=True)
class VDReport:
    exact_vd: float
    approx_vd: float
    sample_count: int
    sdma_steps_used: int
    wall_time: float


class ModelDistribution:
    """Closed-form transition distribution of a PPDDL domain."""

    def __init__(self, domain: DomainSpec):
        self.domain = domain
        self._cache = {}

    def _ground(self, name: str, args):
        key = (name,) + tuple(args)
        cap = self._cache.get(key)
        if cap is None:
            schema = self.domain.capabilities.get(name)
            if schema is None:
                raise KeyError(f"vocabulary mismatch: no capability '{name}'")
            cap = bind_capability(schema, args)
            self._cache[key] = cap
        return cap

    def probability(self, state, name: str, args, next_state) -> float:
        """P(next_state | state, capability); 0 when the precondition is
        unmet or no outcome maps state to next_state."""
        cap = self._ground(name, args)
        if not holds(state, cap.precondition):
            return 0.0
        return sum(
            o.probability for o in cap.outcomes
            if apply_outcome(state, o) == next_state
        )

    def successor_distribution(self, state, name: str, args) -> dict:
        cap = self._ground(name, args)
        if not holds(state, cap.precondition):
            return {}
        dist: Counter = Counter()
        for o in cap.outcomes:
            dist[apply_outcome(state, o)] += o.probability
        return dict(dist)

    def sample_successor(self, state, name: str, args, draw: float):
        """Successor selected by inverse CDF over canonically ordered
        outcomes; shares the draw with the generator that produced the test
        set, so identical models reproduce identical choices."""
        cap = self._ground(name, args)
        if not holds(state, cap.precondition):
            return state
        acc = 0.0
        outcomes = canonical_outcomes(cap)
        for o in outcomes:
            acc += o.probability
            if draw < acc:
                return apply_outcome(state, o)
        return apply_outcome(state, outcomes[-1])


def exact_vd(model_a: DomainSpec, model_b: DomainSpec, test) -> float:
    """Mean absolute gap between the two models' transition probabilities
    over the test triplets."""
    da, db = ModelDistribution(model_a), ModelDistribution(model_b)
    if not test:
        return 0.0
    total = 0.0
    for t in test:
        pa = da.probability(t.state, t.capability, t.args, t.next_state)
        pb = db.probability(t.state, t.capability, t.args, t.next_state)
        total += abs(pa - pb)
    return total / len(test)


def approx_vd(model: DomainSpec, test, seed: int = 0) -> float:
    """Fraction of test triplets where one sample from the model's capability
    mismatches the recorded successor. Uses the recorded uniform draw when
    the test set carries one (common random numbers); otherwise draws fresh
    from `seed`."""
    if not test:
        return 0.0
    dist = ModelDistribution(model)
    rng = np.random.default_rng(np.random.PCG64(seed))
    mismatches = 0
    for t in test:
        draw = getattr(t, "draw", None)
        if draw is None:
            draw = float(rng.random())
        if dist.sample_successor(t.state, t.capability, t.args, draw) != t.next_state:
            mismatches += 1
    return mismatches / len(test)


# ---------------------------------------------------------------------------
# Structural soundness / completeness
# ---------------------------------------------------------------------------


def _capability_structure(domain: DomainSpec, name: str):
    cap = domain.capabilities[name]
    pre = frozenset(conjunction_literals(cap.precondition))
    adds, dels = set(), set()
    for o in cap.outcomes:
        adds |= o.add
        dels |= o.delete
    return pre, frozenset(adds), frozenset(dels)


@dataclass(frozen=True)
class CapabilityDiff:
    missing_pre: frozenset
    excess_pre: frozenset
    missing_add: frozenset
    excess_add: frozenset
    missing_del: frozenset
    excess_del: frozenset

    @property
    def size(self) -> int:
        return (len(self.missing_pre) + len(self.excess_pre)
                + len(self.missing_add) + len(self.excess_add)
                + len(self.missing_del) + len(self.excess_del))


@dataclass(frozen=True)
class StructuralDiff:
    per_capability: dict

    @property
    def size(self) -> int:
        return sum(d.size for d in self.per_capability.values())

    @property
    def is_empty(self) -> bool:
        return self.size == 0

    def describe(self) -> str:
        lines = []
        for cap, d in sorted(self.per_capability.items()):
            if d.size == 0:
                continue
            for label, lits in (
                ("missing precondition", d.missing_pre),
                ("excess precondition", d.excess_pre),
                ("missing add effect", d.missing_add),
                ("excess add effect", d.excess_add),
                ("missing delete effect", d.missing_del),
                ("excess delete effect", d.excess_del),
            ):
                for lit in sorted(lits):
                    sign = "not " if lit.negated else ""
                    lines.append(
                        f"{cap}: {label} ({sign}{lit.pred} {' '.join(lit.args)})".rstrip()
                    )
        return "\n".join(lines) if lines else "(empty)"


def structural_diff(truth: DomainSpec, learned: DomainSpec) -> StructuralDiff:
    """Per-capability missing/excess precondition and effect literals; an
    empty diff is exactly structural soundness plus completeness."""
    if set(truth.capabilities) != set(learned.capabilities):
        raise ValueError("vocabulary mismatch: different capability sets")
    out = {}
    for name in sorted(truth.capabilities):
        t_pre, t_add, t_del = _capability_structure(truth, name)
        l_pre, l_add, l_del = _capability_structure(learned, name)
        out[name] = CapabilityDiff(
            missing_pre=frozenset(t_pre - l_pre),
            excess_pre=frozenset(l_pre - t_pre),
            missing_add=frozenset(t_add - l_add),
            excess_add=frozenset(l_add - t_add),
            missing_del=frozenset(t_del - l_del),
            excess_del=frozenset(l_del - t_del),
        )
    return StructuralDiff(out)


# ---------------------------------------------------------------------------
# Pinsker sanity check
# ---------------------------------------------------------------------------


def pinsker_check(truth: DomainSpec, learned: DomainSpec, test):
    """Checks TV <= sqrt(0.5 * KL) on the exact per-(state, capability)
    successor distributions occurring in the test set. Triplet groups where
    the learned model puts zero mass on a truth-possible successor are
    skipped (KL undefined) and counted."""
    dt, dl = ModelDistribution(truth), ModelDistribution(learned)
    groups = {}
    for t in test:
        groups.setdefault((t.state, t.capability, t.args), None)
    checked = skipped = 0
    ok = True
    for state, name, args in groups:
        p = dt.successor_distribution(state, name, args)
        q = dl.successor_distribution(state, name, args)
        if not p:
            continue
        if any(q.get(s, 0.0) <= 0.0 for s in p):
            skipped += 1
            continue
        tv = 0.5 * sum(
            abs(p.get(s, 0.0) - q.get(s, 0.0)) for s in set(p) | set(q)
        )
        kl = sum(pp * math.log(pp / q[s]) for s, pp in p.items() if pp > 0)
        checked += 1
        if tv > math.sqrt(max(0.0, 0.5 * kl)) + 1e-9:
            ok = False
    return ok, checked, skipped


# ---------------------------------------------------------------------------
# Random-exploration baseline
# ---------------------------------------------------------------------------


def random_baseline(agent: Agent, step_budget: int, seed: int,
                    walk_len: int = 20) -> LearnedModel:
    """Uniform-random grounded capability execution for step_budget steps;
    preconditions learned as the lifted intersection of success states,
    effects by delta lifting plus relative-frequency estimation."""
    from .ground import instantiated_literals, lift_delta, substitute_literal
    from .ppddl import CapabilitySchema, And

    rng = np.random.default_rng(np.random.PCG64(seed))
    signatures = agent.capability_signatures
    groundings = []
    for name in sorted(signatures):
        from .queries import _bindings, CapabilityView

        view = CapabilityView(name, tuple(signatures[name]), (), ())
        for args in sorted(_bindings(view, agent.objects)):
            groundings.append((name, tuple(args)))

    literals = {}
    for name in sorted(signatures):
        cap = CapabilitySchema(name, tuple(signatures[name]), And(), (), "fond")
        literals[name] = tuple(sorted(set(instantiated_literals(cap, agent.predicates))))

    # literal truth intersections over success pre-states, per capability
    always_true = {n: None for n in signatures}
    always_false = {n: None for n in signatures}
    tallies = {n: Counter() for n in signatures}
    counts = Counter()
    diagnostics = []

    state = agent.initial_state
    for step in range(step_budget):
        if step % walk_len == 0:
            state = agent.initial_state
        name, args = groundings[int(rng.integers(len(groundings)))]
        t = agent.execute(state, name, args)
        state = t.next_state
        if not t.success:
            continue
        params = tuple(p for p, _ in signatures[name])
        binding = dict(zip(params, t.args))
        truths = frozenset(
            lit for lit in literals[name]
            if substitute_literal(lit, binding).atom() in t.state
        )
        falses = frozenset(lit for lit in literals[name] if lit not in truths)
        always_true[name] = truths if always_true[name] is None else always_true[name] & truths
        always_false[name] = falses if always_false[name] is None else always_false[name] & falses
        lifted = lift_delta(t.state, t.next_state, params, t.args)
        if lifted is None:
            diagnostics.append(f"{name}{t.args}: delta not liftable; skipped")
            continue
        tallies[name][lifted] += 1
        counts[name] += 1

    preconditions = {}
    outcomes = {}
    for name in sorted(signatures):
        pre = []
        if always_true[name] is not None:
            pre.extend(always_true[name])
            pre.extend(l.negate() for l in always_false[name])
        preconditions[name] = tuple(sorted(pre))
        total = counts.get(name, 0)
        outcomes[name] = tuple(
            (add, delete, k / total)
            for (add, delete), k in sorted(
                tallies[name].items(),
                key=lambda kv: (tuple(sorted(kv[0][0])), tuple(sorted(kv[0][1]))),
            )
        ) if total else ()

    return LearnedModel(
        signatures=dict(signatures),
        predicates=agent.predicates,
        preconditions=preconditions,
        outcomes=outcomes,
        counts={n: int(counts.get(n, 0)) for n in signatures},
        annotations={},
        diagnostics=tuple(diagnostics),
    )


def evaluate_model(truth: DomainSpec, learned: DomainSpec, test,
                   sdma_steps: int = 0) -> VDReport:
    t0 = time.perf_counter()
    ev = exact_vd(truth, learned, test)
    av = approx_vd(learned, test)
    return VDReport(ev, av, len(test), sdma_steps, time.perf_counter() - t0)
