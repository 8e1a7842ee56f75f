"""Distinguishing-query synthesis.

Compiles a pair of candidate models that differ at exactly one location
into a single FOND problem over two renamed copies of the vocabulary: a
strong solution is a policy driving both models into logically inconsistent
predictions, which is then projected back onto the original vocabulary and
packaged as an executable policy query.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import NamedTuple, Optional

from .fond import (
    BudgetExceeded,
    FondAction,
    FondOutcome,
    FondProblem,
    StrongPolicy,
    Unsolvable,
    policy_depth,
    solve_strong,
    verify_strong,
)
from .ground import apply_outcome, substitute_literal
from .ppddl import (
    And,
    CapabilitySchema,
    ConditionalEffect,
    DomainSpec,
    EffectOutcome,
    Lit,
    Or,
    PredicateSchema,
    holds,
)
from .simulator import PolicyQuery

GOAL_ATOM = ("goal",)

COPY_I = "_i"
COPY_J = "_j"


class NoQueryFromState(Exception):
    """No strong distinguishing policy exists from the given start state."""


class CapabilityView(NamedTuple):
    """A candidate model's capability: lifted precondition literals and
    outcome list (positive add/delete literal sets)."""

    name: str
    params: tuple  # of (param name, type name)
    precondition: tuple  # of Lit (signed)
    outcomes: tuple  # of (add frozenset[Lit], delete frozenset[Lit])


def _rename_lit(lit: Lit, copy: str) -> Lit:
    return Lit(lit.pred + copy, lit.args, lit.negated)


def _tag_atom(atom, copy: str):
    return (atom[0] + copy,) + atom[1:]


def _conj(lits) -> And:
    return And(tuple(lits))


def _neg_conj(lits) -> Or:
    """Negation of a conjunction of literals, expanded to a disjunction of
    negated literals (false when the conjunction is empty)."""
    return Or(tuple(l.negate() for l in lits))


def _view_outcomes(view: CapabilityView) -> tuple:
    return view.outcomes or ((frozenset(), frozenset()),)


def build_combined_domain(views_i: dict, views_j: dict, predicates,
                          name: str = "combined") -> DomainSpec:
    """The lifted two-copy domain (used for debug emission and golden tests)."""
    if set(views_i) != set(views_j):
        raise ValueError("candidate models declare different capabilities")
    preds = {}
    for copy in (COPY_I, COPY_J):
        for p in predicates:
            preds[p.name + copy] = PredicateSchema(p.name + copy, p.param_types)
    preds["goal"] = PredicateSchema("goal", ())
    caps = {}
    for cap_name in sorted(views_i):
        vi, vj = views_i[cap_name], views_j[cap_name]
        if vi.params != vj.params:
            raise ValueError(f"parameter mismatch for '{cap_name}'")
        pre_i = tuple(_rename_lit(l, COPY_I) for l in vi.precondition)
        pre_j = tuple(_rename_lit(l, COPY_J) for l in vj.precondition)
        outs_i, outs_j = _view_outcomes(vi), _view_outcomes(vj)
        if len(outs_i) != len(outs_j):
            raise ValueError(f"outcome count mismatch for '{cap_name}'")
        outcomes = []
        for (ai, di), (aj, dj) in zip(outs_i, outs_j):
            both = ConditionalEffect(
                _conj(pre_i + pre_j),
                frozenset(_rename_lit(l, COPY_I) for l in ai)
                | frozenset(_rename_lit(l, COPY_J) for l in aj),
                frozenset(_rename_lit(l, COPY_I) for l in di)
                | frozenset(_rename_lit(l, COPY_J) for l in dj),
            )
            only_i = ConditionalEffect(
                And(pre_i + (_neg_conj(pre_j),)), frozenset({Lit("goal", ())}), frozenset()
            )
            only_j = ConditionalEffect(
                And(pre_j + (_neg_conj(pre_i),)), frozenset({Lit("goal", ())}), frozenset()
            )
            outcomes.append(
                EffectOutcome(frozenset(), frozenset(), None, (both, only_i, only_j))
            )
        combined_name = cap_name + "_ij"
        caps[combined_name] = CapabilitySchema(
            combined_name,
            vi.params,
            Or((_conj(pre_i), _conj(pre_j))),
            tuple(outcomes),
            "fond",
        )
    return DomainSpec(name, (":typing", ":strips", ":non-deterministic"), (), preds, caps)


def divergence_holds(state) -> bool:
    """The compiled goal: the 0-ary goal atom, or any ground atom whose two
    copies disagree."""
    if GOAL_ATOM in state:
        return True
    si, sj = set(), set()
    for atom in state:
        head = atom[0]
        if head.endswith(COPY_I):
            si.add((head[: -len(COPY_I)],) + atom[1:])
        elif head.endswith(COPY_J):
            sj.add((head[: -len(COPY_J)],) + atom[1:])
    return si != sj


def project_i(state) -> frozenset:
    """The i-copy of a combined state, in the original vocabulary."""
    return frozenset(
        (a[0][: -len(COPY_I)],) + a[1:] for a in state if a[0].endswith(COPY_I)
    )


def _ground_view(view: CapabilityView, args) -> tuple:
    binding = dict(zip((p for p, _ in view.params), args))
    pre = tuple(substitute_literal(l, binding) for l in view.precondition)
    outs = tuple(
        (
            frozenset(substitute_literal(l, binding).atom() for l in add),
            frozenset(substitute_literal(l, binding).atom() for l in dele),
        )
        for (add, dele) in _view_outcomes(view)
    )
    return pre, outs


def _combined_action(vi: CapabilityView, vj: CapabilityView, args) -> FondAction:
    pre_i_l, outs_i = _ground_view(vi, args)
    pre_j_l, outs_j = _ground_view(vj, args)
    pre_i = tuple(Lit(l.pred + COPY_I, l.args, l.negated) for l in pre_i_l)
    pre_j = tuple(Lit(l.pred + COPY_J, l.args, l.negated) for l in pre_j_l)
    cond_both = _conj(pre_i + pre_j)
    cond_only_i = And(pre_i + (_neg_conj(pre_j),))
    cond_only_j = And(pre_j + (_neg_conj(pre_i),))
    goal_add = frozenset({GOAL_ATOM})
    outcomes = []
    for (ai, di), (aj, dj) in zip(outs_i, outs_j):
        add_both = frozenset(_tag_atom(a, COPY_I) for a in ai) | frozenset(
            _tag_atom(a, COPY_J) for a in aj
        )
        del_both = frozenset(_tag_atom(a, COPY_I) for a in di) | frozenset(
            _tag_atom(a, COPY_J) for a in dj
        )
        clauses = (
            (cond_both, add_both, del_both),
            (cond_only_i, goal_add, frozenset()),
            (cond_only_j, goal_add, frozenset()),
        )
        outcomes.append(FondOutcome(frozenset(), frozenset(), clauses))
    return FondAction(
        vi.name, tuple(args), Or((_conj(pre_i), _conj(pre_j))), tuple(outcomes)
    )


def _bindings(view: CapabilityView, objects: dict):
    pools = [
        [o for o, t in objects.items() if t == ptype or ptype == "object"]
        for _, ptype in view.params
    ]
    return product(*pools)


def combine_models(views_i: dict, views_j: dict, s0: frozenset, objects: dict,
                   anchor: Optional[tuple] = None) -> FondProblem:
    """The grounded two-copy FOND problem from start state s0.

    `anchor`, when given as (capability name, args), is ordered first among
    the ground actions; the rest follow in lexicographic order. Actions are
    generated lazily, so shallow solves never touch most of them.
    """
    if set(views_i) != set(views_j):
        raise ValueError("candidate models declare different capabilities")
    diffs = [n for n in views_i if views_i[n] != views_j[n]]
    if len(diffs) != 1:
        raise ValueError(
            f"candidate models must differ in exactly one capability, got {diffs}"
        )

    init = frozenset(_tag_atom(a, COPY_I) for a in s0) | frozenset(
        _tag_atom(a, COPY_J) for a in s0
    )

    def gen_actions():
        if anchor is not None:
            name, args = anchor
            yield _combined_action(views_i[name], views_j[name], tuple(args))
        for name in sorted(views_i):
            vi, vj = views_i[name], views_j[name]
            for args in sorted(_bindings(vi, objects)):
                if anchor is not None and (name, tuple(args)) == (anchor[0], tuple(anchor[1])):
                    continue
                yield _combined_action(vi, vj, tuple(args))

    return FondProblem(init, divergence_holds, gen_actions)


@dataclass(frozen=True)
class QueryPlan:
    """A distinguishing query plus the bookkeeping the learner needs."""

    query: PolicyQuery
    depth: int
    capability: str  # the capability executed at the divergence point
    args: tuple
    combined_policy: StrongPolicy
    distinguishing: bool


def check_distinguishing(views_i: dict, views_j: dict, s0: frozenset,
                         policy: StrongPolicy) -> bool:
    """Co-simulates the policy under the two candidate models directly:
    true iff every nondeterministic branch reaches divergence (different
    executability of the chosen capability, or differing predicted states)."""

    def walk(si, sj, combined, onpath) -> bool:
        if si != sj:
            return True
        action = policy.mapping.get(combined)
        if action is None:
            return GOAL_ATOM in combined
        if combined in onpath:
            return False
        vi, vj = views_i[action.name], views_j[action.name]
        pre_i, outs_i = _ground_view(vi, action.args)
        pre_j, outs_j = _ground_view(vj, action.args)
        ok_i = all(holds(si, l) for l in pre_i)
        ok_j = all(holds(sj, l) for l in pre_j)
        if ok_i != ok_j:
            return True
        if not ok_i:
            return False
        newpath = onpath | {combined}
        for k, ((ai, di), (aj, dj)) in enumerate(zip(outs_i, outs_j)):
            si2 = frozenset((si - di) | ai)
            sj2 = frozenset((sj - dj) | aj)
            c2 = apply_outcome(combined, action.outcomes[k])
            if not walk(si2, sj2, c2, newpath):
                return False
        return True

    init = frozenset(_tag_atom(a, COPY_I) for a in s0) | frozenset(
        _tag_atom(a, COPY_J) for a in s0
    )
    return walk(s0, s0, init, frozenset())


def generate_query(views_i: dict, views_j: dict, s0: frozenset, objects: dict,
                   attempts: int, node_budget: int = 10**6,
                   anchor: Optional[tuple] = None,
                   stop_condition=None) -> QueryPlan:
    """Plans a distinguishing policy from s0 and packages it as a policy
    query with step cutoff 2 x policy depth. Raises NoQueryFromState when
    the compiled problem has no strong solution within budget."""
    problem = combine_models(views_i, views_j, s0, objects, anchor)
    try:
        policy = solve_strong(problem, node_budget)
    except (Unsolvable, BudgetExceeded) as exc:
        raise NoQueryFromState(str(exc)) from exc
    assert verify_strong(problem, policy), "planner returned a non-strong policy"
    depth = policy_depth(problem, policy)
    distinguishing = check_distinguishing(views_i, views_j, s0, policy)

    mapping = {}
    final = None
    for combined_state, action in policy.mapping.items():
        key = project_i(combined_state)
        if key not in mapping:
            mapping[key] = (action.name, action.args)
        succs = [apply_outcome(combined_state, o) for o in action.outcomes]
        if succs and all(divergence_holds(s) for s in succs):
            final = (action.name, action.args)
    if final is None:
        raise NoQueryFromState("policy has no divergence step")

    query = PolicyQuery(
        initial_state=s0,
        policy=mapping,
        stop_condition=stop_condition if stop_condition is not None else Or(()),
        max_steps=max(1, 2 * depth),
        attempts=attempts,
    )
    return QueryPlan(query, depth, final[0], tuple(final[1]), policy, distinguishing)
