"""Active capability-model learner.

Enumerates every (capability, slot, literal) location, builds the three
candidate models that place the literal positively / negatively / not at
all, synthesizes distinguishing policy queries for candidate pairs, runs
them on the black-box agent, and prunes the candidates the responses
contradict. Effects observed in traces concretize effect locations
directly; outcome probabilities are fit by maximum likelihood over a final
replay phase from identifiability-witness states.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .ground import instantiated_literals, lift_delta, substitute_literal
from .ppddl import And, CapabilitySchema, DomainSpec, EffectOutcome, Lit, Or
from .queries import CapabilityView, NoQueryFromState, generate_query
from .simulator import PolicyQuery

FALSE_FORMULA = Or(())

PRE = "pre"
EFF = "eff"


class Mode(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    IGNORED = "ignored"
    UNDETERMINED = "undetermined"


class Location(NamedTuple):
    capability: str
    slot: str  # PRE or EFF
    literal: Lit  # positive form

    def describe(self) -> str:
        sign = "" if not self.literal.negated else "not "
        body = " ".join((self.literal.pred,) + tuple(self.literal.args))
        return f"{self.capability}/{self.slot}/({sign}{body})"


PAIR_ORDER = (
    (Mode.TRUE, Mode.FALSE),
    (Mode.TRUE, Mode.IGNORED),
    (Mode.FALSE, Mode.IGNORED),
)


@dataclass
class CandidateModel:
    """The evolving partial model: one annotation per location, plus the
    outcome deltas harvested from traces so far."""

    signatures: dict  # capability name -> params
    literals: dict  # capability name -> tuple of instantiated Lit
    annotations: dict  # Location -> Mode
    outcomes: dict  # capability name -> list of (add, delete) lifted sets

    @classmethod
    def initial(cls, predicates, signatures: dict) -> "CandidateModel":
        literals = {}
        annotations = {}
        for name in sorted(signatures):
            cap = CapabilitySchema(name, tuple(signatures[name]), And(), (), "fond")
            lits = tuple(sorted(set(instantiated_literals(cap, predicates))))
            literals[name] = lits
            for slot in (PRE, EFF):
                for lit in lits:
                    annotations[Location(name, slot, lit)] = Mode.UNDETERMINED
        return cls(dict(signatures), literals, annotations, {n: [] for n in signatures})

    def mode(self, loc: Location) -> Mode:
        return self.annotations[loc]

    def set_mode(self, loc: Location, mode: Mode):
        self.annotations[loc] = mode

    def undetermined(self) -> int:
        return sum(1 for m in self.annotations.values() if m is Mode.UNDETERMINED)

    def pre_literals(self, cap: str, override: Optional[Location] = None,
                     mode: Optional[Mode] = None) -> tuple:
        out = []
        for lit in self.literals[cap]:
            loc = Location(cap, PRE, lit)
            m = mode if (override is not None and loc == override) else self.annotations[loc]
            if m is Mode.TRUE:
                out.append(lit)
            elif m is Mode.FALSE:
                out.append(lit.negate())
        return tuple(out)

    def view(self, cap: str, override: Optional[Location] = None,
             mode: Optional[Mode] = None) -> CapabilityView:
        pre = self.pre_literals(cap, override, mode)
        outs = tuple((frozenset(a), frozenset(d)) for a, d in self.outcomes[cap])
        if override is not None and override.capability == cap and override.slot == EFF:
            lit = override.literal
            base = outs or ((frozenset(), frozenset()),)
            if mode is Mode.TRUE:
                outs = tuple((a | {lit}, d) for a, d in base)
            elif mode is Mode.FALSE:
                outs = tuple((a, d | {lit}) for a, d in base)
            else:
                outs = base
        return CapabilityView(cap, tuple(self.signatures[cap]), pre, outs)

    def views(self, override: Optional[Location] = None,
              mode: Optional[Mode] = None) -> dict:
        return {c: self.view(c, override, mode) for c in self.signatures}


def candidate_triple(model: CandidateModel, loc: Location) -> dict:
    """The three capability-view maps that differ from the current model
    only in how `loc` places its literal."""
    if model.mode(loc) is not Mode.UNDETERMINED:
        raise ValueError(f"location already concretized: {loc.describe()}")
    return {m: model.views(loc, m) for m in (Mode.TRUE, Mode.FALSE, Mode.IGNORED)}


@dataclass
class StatePool:
    """Success witnesses per capability plus the explored-state frontier."""

    success: dict = field(default_factory=dict)  # cap -> list of (state, args)
    frontier: list = field(default_factory=list)
    _seen_success: set = field(default_factory=set)
    _seen_states: set = field(default_factory=set)

    def add_state(self, state):
        if state not in self._seen_states:
            self._seen_states.add(state)
            self.frontier.append(state)

    def add_success(self, cap: str, state, args):
        key = (cap, state, args)
        if key not in self._seen_success:
            self._seen_success.add(key)
            self.success.setdefault(cap, []).append((state, args))

    def entries(self, cap: str) -> list:
        return self.success.get(cap, [])


@dataclass
class LearnerConfig:
    attempts: int = 5  # policy executions per query
    node_budget: int = 10**6  # planner expansions per compile
    walk_limit: int = 500  # simulator steps per exploration refresh
    seed_rounds: int = 10  # at most this many refreshes to seed the pool
    replay_target: int = 1000  # per-capability samples for probability fitting
    snapshot_every: int = 500  # simulator steps between model snapshots
    max_candidates: int = 50  # pooled start states tried per pair query


@dataclass
class LearnedModel:
    signatures: dict
    predicates: tuple
    preconditions: dict  # cap -> tuple of signed Lit
    outcomes: dict  # cap -> tuple of (add, delete, probability)
    counts: dict  # cap -> observation count behind the probabilities
    annotations: dict  # final Location -> Mode
    diagnostics: tuple = ()

    def effect_literals(self, cap: str) -> tuple:
        adds, dels = set(), set()
        for add, delete, _ in self.outcomes.get(cap, ()):
            adds |= add
            dels |= delete
        return frozenset(adds), frozenset(dels)

    def to_domain(self, name: str = "learned") -> DomainSpec:
        types = sorted(
            {t for p in self.predicates for t in p.param_types}
            | {t for ps in self.signatures.values() for _, t in ps}
        )
        predicates = {p.name: p for p in self.predicates}
        caps = {}
        for cap in sorted(self.signatures):
            outs = self.outcomes.get(cap, ())
            if not outs:
                outcomes = (EffectOutcome(frozenset(), frozenset(), 1.0),)
            else:
                outcomes = tuple(
                    EffectOutcome(add, delete, prob)
                    for add, delete, prob in sorted(
                        outs, key=lambda o: (tuple(sorted(o[0])), tuple(sorted(o[1])))
                    )
                )
            caps[cap] = CapabilitySchema(
                cap,
                tuple(self.signatures[cap]),
                And(tuple(sorted(self.preconditions.get(cap, ())))),
                outcomes,
                "probabilistic",
            )
        return DomainSpec(
            name,
            (":typing", ":strips", ":probabilistic-effects"),
            tuple(types),
            predicates,
            caps,
        )


def fit_probabilities(model_outcomes: dict, tallies: dict, counts: dict) -> tuple:
    """Relative-frequency estimates per capability: tally / count.

    Returns (outcomes, diagnostics): capabilities never observed keep no
    outcome distribution and are reported.
    """
    fitted = {}
    diagnostics = []
    for cap in sorted(model_outcomes):
        total = counts.get(cap, 0)
        tally = tallies.get(cap, {})
        if total <= 0:
            diagnostics.append(f"{cap}: never observed; probabilities undefined")
            fitted[cap] = ()
            continue
        fitted[cap] = tuple(
            (add, delete, n / total)
            for (add, delete), n in sorted(tally.items(), key=lambda kv: (
                tuple(sorted(kv[0][0])), tuple(sorted(kv[0][1]))))
        )
    return fitted, tuple(diagnostics)


def _injective(args) -> bool:
    return len(set(args)) == len(args)


class ActiveLearner:
    """Drives the full learn loop against one black-box agent."""

    def __init__(self, agent, config: LearnerConfig = LearnerConfig()):
        self.agent = agent
        self.config = config
        self.model = CandidateModel.initial(agent.predicates, agent.capability_signatures)
        self.pool = StatePool()
        self.audit: list = []
        self.snapshots: list = []  # (sdma_steps, queries_issued, domain text)
        self.queries_issued = 0
        self.diagnostics: list = []
        self.all_queries_distinguishing = True
        self._rng = np.random.default_rng(np.random.PCG64(agent.seed ^ 0x5EED))
        self._frontier_idx = 0
        self.explore_stats = {"directed": 0, "directed_failures": 0, "random": 0}
        self._learn_tally = {c: Counter() for c in self.model.signatures}
        self._learn_count = Counter()
        self._groundings = self._all_groundings()
        self._next_snapshot = config.snapshot_every

    # -- pool seeding and exploration -----------------------------------------

    def _all_groundings(self) -> list:
        out = []
        for cap in sorted(self.model.signatures):
            view = self.model.view(cap)
            from .queries import _bindings  # deterministic object-order bindings

            for args in sorted(_bindings(view, self.agent.objects)):
                out.append((cap, tuple(args)))
        return out

    def _annotated_pre_holds(self, state, cap: str, args) -> bool:
        binding = dict(zip((p for p, _ in self.model.signatures[cap]), args))
        for lit in self.model.literals[cap]:
            mode = self.model.annotations[Location(cap, PRE, lit)]
            if mode is Mode.TRUE or mode is Mode.FALSE:
                atom = substitute_literal(lit, binding).atom()
                if (atom in state) != (mode is Mode.TRUE):
                    return False
        return True

    def explore(self, budget: int):
        """Directed exploration: walk the frontier executing capabilities whose
        learned preconditions hold (unpooled capabilities first), falling back
        to uniformly random execution once the frontier is exhausted."""
        executed = 0
        while executed < budget:
            if self._frontier_idx < len(self.pool.frontier):
                state = self.pool.frontier[self._frontier_idx]
                self._frontier_idx += 1
                unpooled = [g for g in self._groundings if not self.pool.entries(g[0])]
                pooled = [g for g in self._groundings if self.pool.entries(g[0])]
                for cap, args in unpooled + pooled:
                    if not self._annotated_pre_holds(state, cap, args):
                        continue
                    t = self.agent.execute(state, cap, args)
                    executed += 1
                    self.explore_stats["directed"] += 1
                    if not t.success:
                        self.explore_stats["directed_failures"] += 1
                    self._harvest([t])
                    if executed >= budget:
                        break
            else:
                state = self.pool.frontier[
                    int(self._rng.integers(len(self.pool.frontier)))
                ]
                cap, args = self._groundings[
                    int(self._rng.integers(len(self._groundings)))
                ]
                t = self.agent.execute(state, cap, args)
                executed += 1
                self.explore_stats["random"] += 1
                self._harvest([t])

    def _seed_pool(self):
        self.pool.add_state(self.agent.initial_state)
        rounds = 0
        while rounds < self.config.seed_rounds:
            missing = [c for c in self.model.signatures if not self.pool.entries(c)]
            if not missing and rounds >= 1:
                break
            self.explore(self.config.walk_limit)
            rounds += 1
        missing = [c for c in self.model.signatures if not self.pool.entries(c)]
        if missing:
            self.diagnostics.append(f"unpooled capabilities after seeding: {missing}")

    # -- trace harvesting -------------------------------------------------------

    def _harvest(self, transitions):
        """Records pool membership and lifts successful deltas into effect
        annotations and outcome tallies."""
        for t in transitions:
            self.pool.add_state(t.state)
            self.pool.add_state(t.next_state)
            if not t.success:
                continue
            self.pool.add_success(t.capability, t.state, t.args)
            params = tuple(p for p, _ in self.model.signatures[t.capability])
            lifted = lift_delta(t.state, t.next_state, params, t.args)
            if lifted is None:
                self.diagnostics.append(
                    f"delta of {t.capability}{t.args} not liftable; skipped"
                )
                continue
            add, delete = lifted
            key = (add, delete)
            if key not in self.model.outcomes[t.capability]:
                self.model.outcomes[t.capability].append(key)
            self._learn_tally[t.capability][key] += 1
            self._learn_count[t.capability] += 1
            for lit in add:
                self._witness_effect(Location(t.capability, EFF, lit), Mode.TRUE)
            for lit in delete:
                self._witness_effect(Location(t.capability, EFF, lit), Mode.FALSE)

    def _witness_effect(self, loc: Location, mode: Mode):
        current = self.model.annotations.get(loc)
        if current is None:
            self.diagnostics.append(f"unknown effect location {loc.describe()}")
            return
        if current is mode:
            return
        if current in (Mode.UNDETERMINED, Mode.IGNORED):
            # a direct flip witness beats absence-of-flip inference
            if current is Mode.IGNORED:
                self.diagnostics.append(
                    f"{loc.describe()}: flip witness overrides earlier Ignored"
                )
            self.model.set_mode(loc, mode)
        else:
            self.diagnostics.append(
                f"{loc.describe()}: contradictory effect evidence "
                f"({current.value} vs {mode.value})"
            )

    # -- query posing per location ---------------------------------------------

    def _location_list(self) -> list:
        out = []
        for cap in sorted(self.model.signatures):
            for slot in (PRE, EFF):
                for lit in self.model.literals[cap]:
                    out.append(Location(cap, slot, lit))
        return out

    def _forced_polarity(self, loc: Location) -> Optional[bool]:
        """True/False when the capability's learned precondition pins the
        literal's start value; None when free."""
        m = self.model.annotations[Location(loc.capability, PRE, loc.literal)]
        if m is Mode.TRUE:
            return True
        if m is Mode.FALSE:
            return False
        return None

    def _pair_start_polarity(self, loc: Location, pair) -> Optional[bool]:
        """The literal's value at the query start state, or raises if the
        pair cannot be tested. For effect locations: testing the add side
        needs the literal false at the start, the delete side needs it true."""
        if loc.slot == PRE:
            if pair == (Mode.TRUE, Mode.FALSE):
                return None  # any pooled state works unmodified
            if pair == (Mode.TRUE, Mode.IGNORED):
                return False
            return True  # (FALSE, IGNORED)
        forced = self._forced_polarity(loc)
        if pair == (Mode.TRUE, Mode.FALSE):
            return forced if forced is not None else False
        if pair == (Mode.TRUE, Mode.IGNORED):
            if forced is True:
                raise _InfeasiblePair()
            return False
        if forced is False:
            raise _InfeasiblePair()
        return True  # (FALSE, IGNORED)

    def _candidates(self, loc: Location, polarity: Optional[bool]) -> list:
        """Anchored start states: pooled success states of the capability
        (injective bindings only), single-bit adjusted to the polarity."""
        out = []
        for state, args in self.pool.entries(loc.capability):
            if not _injective(args):
                continue
            binding = dict(zip((p for p, _ in self.model.signatures[loc.capability]), args))
            atom = substitute_literal(loc.literal, binding).atom()
            if polarity is None:
                s0 = state
            elif polarity:
                s0 = state | {atom}
            else:
                s0 = state - {atom}
            out.append((s0, args, atom))
            if len(out) >= self.config.max_candidates:
                break
        return out

    def _goal_formula(self, loc: Location, atom, polarity: Optional[bool]):
        if loc.slot == PRE or polarity is None:
            return FALSE_FORMULA
        lit = Lit(atom[0], tuple(atom[1:]))
        # stop once the conclusive flip has been observed
        return lit.negate() if polarity else lit

    def _pose_pair_query(self, idx: int, loc: Location, pair, views_by_mode):
        try:
            polarity = self._pair_start_polarity(loc, pair)
        except _InfeasiblePair:
            return None
        refreshed = False
        while True:
            for s0, args, atom in self._candidates(loc, polarity):
                result = self._issue(idx, loc, pair, views_by_mode, s0, args, atom, polarity)
                if result is not None:
                    return result
            if refreshed:
                return None
            self.explore(self.config.walk_limit)
            refreshed = True

    def _issue(self, idx, loc, pair, views_by_mode, s0, args, atom, polarity):
        goal = self._goal_formula(loc, atom, polarity)
        try:
            plan = generate_query(
                views_by_mode[pair[0]],
                views_by_mode[pair[1]],
                s0,
                self.agent.objects,
                attempts=self.config.attempts,
                node_budget=self.config.node_budget,
                anchor=(loc.capability, args),
                stop_condition=goal,
            )
        except NoQueryFromState:
            return None
        self.queries_issued += 1
        self.all_queries_distinguishing &= plan.distinguishing
        response = self.agent.run_policy(plan.query)
        self._harvest(response.transitions)
        pruned = self._classify(loc, pair, response, s0, args, atom, polarity)
        self.audit.append({
            "kind": "query",
            "iteration": idx,
            "location": loc.describe(),
            "pair": "/".join(m.value for m in pair),
            "query_depth": plan.depth,
            "sdma_steps": self.agent.step_count,
            "distinguishing": plan.distinguishing,
            "goal_reached": response.goal_reached,
            "pruned": sorted(m.value for m in (pruned or ())),
            "surviving": sorted(m.value for m in pair if not pruned or m not in pruned),
        })
        return pruned

    def _classify(self, loc, pair, response, s0, anchor_args, atom, polarity):
        """Prunes pair members contradicted by the agent's behavior at the
        divergence step. Returns the pruned set, or None when inconclusive."""
        evidence = []
        for trace in response.attempt_traces:
            if not trace:
                continue
            t = trace[-1]
            if t.capability == loc.capability:
                evidence.append(t)
        if not evidence:
            return None
        if loc.slot == PRE:
            pruned = set()
            for t in evidence:
                for mode in pair:
                    lits = self.model.pre_literals(loc.capability, loc, mode)
                    binding = dict(
                        zip((p for p, _ in self.model.signatures[loc.capability]), t.args)
                    )
                    predicted = all(
                        (substitute_literal(l, binding).atom() in t.state) != l.negated
                        for l in lits
                    )
                    if t.success and not predicted:
                        pruned.add(mode)
                    elif (not t.success and predicted and t.state == s0
                          and t.args == anchor_args):
                        pruned.add(mode)
            if not pruned:
                return None
            if len(pruned) == len(pair):
                self.diagnostics.append(
                    f"{loc.describe()}: evidence contradicted both of {pair}"
                )
                return None
            return pruned
        # effect slot: flip witnesses over the attempts
        saw_add = saw_del = False
        successes = 0
        for t in evidence:
            if not t.success:
                continue
            successes += 1
            binding = dict(
                zip((p for p, _ in self.model.signatures[loc.capability]), t.args)
            )
            ground = substitute_literal(loc.literal, binding).atom()
            u, v = ground in t.state, ground in t.next_state
            if not u and v:
                saw_add = True
            elif u and not v:
                saw_del = True
        if saw_add and saw_del:
            self.diagnostics.append(f"{loc.describe()}: both flip directions observed")
            return None
        if saw_add:
            return {m for m in pair if m is not Mode.TRUE}
        if saw_del:
            return {m for m in pair if m is not Mode.FALSE}
        if successes == 0:
            return None
        # no flip over the attempts: the mode claiming one at this polarity loses
        loser = Mode.TRUE if polarity is False else Mode.FALSE
        return {loser} if loser in pair else None

    # -- the main loop ----------------------------------------------------------

    def _resolve_location(self, idx: int, loc: Location):
        alive = {Mode.TRUE, Mode.FALSE, Mode.IGNORED}
        for pair in PAIR_ORDER:
            if self.model.mode(loc) is not Mode.UNDETERMINED:
                return  # concretized by harvesting mid-loop
            if len(alive) == 1:
                break
            if pair[0] not in alive or pair[1] not in alive:
                continue
            # rebuilt per pair: harvesting inside earlier queries may have
            # grown the outcome lists or concretized other locations
            views_by_mode = candidate_triple(self.model, loc)
            pruned = self._pose_pair_query(idx, loc, pair, views_by_mode)
            if pruned:
                alive -= pruned
                if not alive:
                    self.diagnostics.append(f"{loc.describe()}: all candidates pruned")
                    return
        if len(alive) == 1:
            self.model.set_mode(loc, next(iter(alive)))
        else:
            self.diagnostics.append(
                f"{loc.describe()}: left undetermined ({sorted(m.value for m in alive)})"
            )

    def _maybe_snapshot(self, force=False):
        if force or self.agent.step_count >= self._next_snapshot:
            from .ppddl import domain_to_str

            self.snapshots.append(
                (self.agent.step_count, self.queries_issued,
                 domain_to_str(self.build_model(final=False).to_domain()))
            )
            while self._next_snapshot <= self.agent.step_count:
                self._next_snapshot += self.config.snapshot_every

    def learn(self) -> LearnedModel:
        self._seed_pool()
        self._maybe_snapshot(force=True)
        locations = self._location_list()
        for idx, loc in enumerate(locations):
            if self.model.mode(loc) is not Mode.UNDETERMINED:
                continue
            self._resolve_location(idx, loc)
            self._maybe_snapshot()
        self._replay_tally = {c: Counter() for c in self.model.signatures}
        self._replay_count = Counter()
        self._replay()
        self._maybe_snapshot(force=True)
        return self.build_model(final=True)

    # -- probability fitting -----------------------------------------------------

    def _witness_start(self, cap: str):
        """A pooled success state adjusted so every learned effect literal is
        at its pre-value: adds absent, deletes present. From such a state each
        outcome realizes its full delta, so outcomes are identifiable."""
        adds = [l for l in self.model.literals[cap]
                if self.model.annotations[Location(cap, EFF, l)] is Mode.TRUE]
        dels = [l for l in self.model.literals[cap]
                if self.model.annotations[Location(cap, EFF, l)] is Mode.FALSE]
        for state, args in self.pool.entries(cap):
            if not _injective(args):
                continue
            binding = dict(zip((p for p, _ in self.model.signatures[cap]), args))
            s = set(state)
            for lit in adds:
                if self.model.annotations[Location(cap, PRE, lit)] is Mode.TRUE:
                    self.diagnostics.append(
                        f"{cap}: add effect {lit} is precondition-true (vacuous add)"
                    )
                    continue
                s.discard(substitute_literal(lit, binding).atom())
            for lit in dels:
                if self.model.annotations[Location(cap, PRE, lit)] is Mode.FALSE:
                    self.diagnostics.append(
                        f"{cap}: delete effect {lit} is precondition-false (vacuous delete)"
                    )
                    continue
                s.add(substitute_literal(lit, binding).atom())
            return frozenset(s), args
        return None

    def _replay(self):
        """Extra policy replays from witness states until each capability has
        replay_target clean observations for the MLE fit."""
        for cap in sorted(self.model.signatures):
            witness = self._witness_start(cap)
            if witness is None:
                self.diagnostics.append(f"{cap}: no witness state for replay")
                continue
            state, args = witness
            query = PolicyQuery(
                initial_state=state,
                policy={state: (cap, args)},
                stop_condition=FALSE_FORMULA,
                max_steps=1,
                attempts=self.config.replay_target,
            )
            response = self.agent.run_policy(query)
            self.queries_issued += 1
            params = tuple(p for p, _ in self.model.signatures[cap])
            failures = 0
            for t in response.transitions:
                if not t.success:
                    failures += 1
                    continue
                lifted = lift_delta(t.state, t.next_state, params, t.args)
                if lifted is None:
                    continue
                self._replay_tally[cap][lifted] += 1
                self._replay_count[cap] += 1
            self._harvest(response.transitions)
            if failures:
                self.diagnostics.append(f"{cap}: {failures} failed replay executions")
            self.audit.append({
                "kind": "replay",
                "location": f"{cap}/replay",
                "samples": int(self._replay_count[cap]),
                "sdma_steps": self.agent.step_count,
            })

    def build_model(self, final: bool = True) -> LearnedModel:
        if final and getattr(self, "_replay_count", None):
            tallies, counts = self._replay_tally, self._replay_count
        else:
            tallies, counts = self._learn_tally, self._learn_count
        fitted, diag = fit_probabilities(self.model.outcomes, tallies, counts)
        preconditions = {
            cap: self.model.pre_literals(cap) for cap in self.model.signatures
        }
        return LearnedModel(
            signatures=dict(self.model.signatures),
            predicates=self.agent.predicates,
            preconditions=preconditions,
            outcomes=fitted,
            counts={c: int(counts.get(c, 0)) for c in self.model.signatures},
            annotations=dict(self.model.annotations),
            diagnostics=tuple(self.diagnostics) + diag,
        )


class _InfeasiblePair(Exception):
    """The pair needs a start polarity the capability's precondition forbids."""
