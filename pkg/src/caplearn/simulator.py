"""Black-box agent simulator.

Wraps a hidden ground-truth probabilistic model behind an execution
interface: callers see capability signatures, predicates, objects, and the
states visited by executions; never the hidden preconditions, effects, or
probabilities.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .ground import GroundCapability, apply_outcome, ground_domain
from .ppddl import DomainSpec, Formula, Or, ProblemSpec, holds


class Transition(NamedTuple):
    state: frozenset
    capability: str
    args: tuple
    next_state: frozenset
    success: bool


@dataclass(frozen=True)
class PolicyQuery:
    """Run `policy` from `initial_state` for `attempts` tries, each capped at
    `max_steps` steps, stopping early on `stop_condition`."""

    initial_state: frozenset
    policy: dict  # exact state -> (capability name, args)
    stop_condition: Formula
    max_steps: int
    attempts: int

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")


@dataclass(frozen=True)
class QueryResponse:
    goal_reached: bool
    attempt_traces: tuple  # of tuple[Transition, ...]

    @property
    def transitions(self) -> list:
        return [t for trace in self.attempt_traces for t in trace]


class TestTransition(NamedTuple):
    """A held-out test triplet plus the uniform draw that selected the true
    outcome (lets evaluators reuse the draw for coupled sampling)."""

    state: frozenset
    capability: str
    args: tuple
    next_state: frozenset
    draw: float


def canonical_outcomes(cap: GroundCapability) -> list:
    """Outcomes in a model-independent order (sorted by ground delta)."""
    return sorted(cap.outcomes, key=lambda o: o.delta_key())


class Agent:
    """A simulated black-box sequential decision maker.

    The hidden model is only used internally; the public surface is the
    instruction set (capability signatures), the predicate vocabulary, the
    object set, and execution of capabilities / policies.
    """

    def __init__(self, domain: DomainSpec, problem: ProblemSpec, seed: int,
                 trace_sink: Optional[Callable] = None):
        self._domain = domain
        self._problem = problem
        self._grounded = ground_domain(domain, problem.objects)
        self._rng = np.random.default_rng(np.random.PCG64(seed))
        self._steps = 0
        self._executions = {name: 0 for name in domain.capabilities}
        self._trace_sink = trace_sink
        self.seed = seed

    # -- public, black-box surface -------------------------------------------

    @property
    def capability_signatures(self) -> dict:
        """name -> tuple of (param name, type name)."""
        return {c.name: c.params for c in self._domain.capabilities.values()}

    @property
    def predicates(self) -> tuple:
        return self._domain.predicate_list()

    @property
    def objects(self) -> dict:
        return dict(self._problem.objects)

    @property
    def initial_state(self) -> frozenset:
        return self._problem.init

    @property
    def step_count(self) -> int:
        return self._steps

    @property
    def execution_counts(self) -> dict:
        return dict(self._executions)

    def execute(self, state: frozenset, name: str, args: tuple) -> Transition:
        """One capability execution; failure leaves the state unchanged."""
        cap = self._grounded.get((name,) + tuple(args))
        if cap is None:
            if name not in self._domain.capabilities:
                raise KeyError(f"unknown capability '{name}'")
            raise KeyError(f"ill-typed arguments for '{name}': {args}")
        self._steps += 1
        self._executions[name] += 1
        if not holds(state, cap.precondition):
            return Transition(state, name, tuple(args), state, False)
        outcome = self._sample_outcome(cap)[1]
        return Transition(state, name, tuple(args), apply_outcome(state, outcome), True)

    def run_policy(self, query: PolicyQuery) -> QueryResponse:
        goal_reached = False
        traces = []
        for attempt in range(query.attempts):
            state = query.initial_state
            trace = []
            steps = 0
            while True:
                if holds(state, query.stop_condition):
                    goal_reached = True
                    break
                if steps >= query.max_steps:
                    break
                action = query.policy.get(state)
                if action is None:
                    break
                t = self.execute(state, action[0], action[1])
                trace.append(t)
                if self._trace_sink is not None:
                    self._emit(attempt, steps, t)
                steps += 1
                state = t.next_state
                if not t.success:
                    break
            else:  # pragma: no cover
                pass
            traces.append(tuple(trace))
        return QueryResponse(goal_reached, tuple(traces))

    # -- evaluation-only helpers ---------------------------------------------

    def sample_test_transitions(self, problems, n: int, walk_len: int = 20) -> list:
        """n successful triplets from seeded random walks over the hidden
        model on the given problems; used by the evaluation harness only."""
        if n < 1:
            raise ValueError("n must be >= 1")
        grounded_per_problem = [
            sorted(ground_domain(self._domain, p.objects).values(), key=lambda c: c.key)
            for p in problems
        ]
        out = []
        while len(out) < n:
            idx = int(self._rng.integers(len(problems)))
            state = problems[idx].init
            caps = grounded_per_problem[idx]
            for _ in range(walk_len):
                applicable_caps = [c for c in caps if holds(state, c.precondition)]
                if not applicable_caps:
                    break
                cap = applicable_caps[int(self._rng.integers(len(applicable_caps)))]
                draw, outcome = self._sample_outcome(cap)
                nxt = apply_outcome(state, outcome)
                out.append(TestTransition(state, cap.name, cap.args, nxt, draw))
                state = nxt
                if len(out) >= n:
                    break
        return out

    # -- internals -------------------------------------------------------------

    def _sample_outcome(self, cap: GroundCapability):
        outcomes = canonical_outcomes(cap)
        draw = float(self._rng.random())
        acc = 0.0
        for outcome in outcomes:
            acc += outcome.probability
            if draw < acc:
                return draw, outcome
        return draw, outcomes[-1]

    def _emit(self, attempt: int, step: int, t: Transition):
        self._trace_sink(json.dumps({
            "attempt": attempt,
            "step": step,
            "state": sorted(" ".join(a) for a in t.state),
            "capability": t.capability,
            "args": list(t.args),
            "next_state": sorted(" ".join(a) for a in t.next_state),
            "success": t.success,
        }, sort_keys=True))


def make_test_set(domain: DomainSpec, problems, n: int, seed: int,
                  walk_len: int = 20) -> list:
    """Frozen held-out transition set, independent of any training stream."""
    agent = Agent(domain, problems[0], seed)
    return agent.sample_test_transitions(list(problems), n, walk_len)
