"""Grounding: parameter instantiation, capability grounding, state updates."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

from .ppddl import (
    And,
    Atom,
    CapabilitySchema,
    ConditionalEffect,
    DomainSpec,
    EffectOutcome,
    Formula,
    Lit,
    Or,
    PredicateSchema,
    holds,
)


def instantiated_literals(cap: CapabilitySchema, predicates) -> list:
    """All positive literals over `cap`'s parameters, one per way of filling
    each predicate's slots from the parameter list (repetition allowed)."""
    out = []
    params = cap.param_names
    for pred in predicates:
        for combo in product(params, repeat=pred.arity):
            out.append(Lit(pred.name, combo))
    return out


def substitute_literal(lit: Lit, binding: dict) -> Lit:
    return Lit(lit.pred, tuple(binding.get(a, a) for a in lit.args), lit.negated)


def substitute_formula(formula: Formula, binding: dict) -> Formula:
    if isinstance(formula, Lit):
        return substitute_literal(formula, binding)
    if isinstance(formula, And):
        return And(tuple(substitute_formula(c, binding) for c in formula.children))
    if isinstance(formula, Or):
        return Or(tuple(substitute_formula(c, binding) for c in formula.children))
    raise TypeError(f"not a formula: {formula!r}")


def ground_atoms(lits, binding: dict) -> frozenset:
    return frozenset(substitute_literal(l, binding).atom() for l in lits)


@dataclass(frozen=True)
class GroundOutcome:
    add: frozenset  # of Atom
    delete: frozenset
    probability: Optional[float] = None
    conditionals: tuple = ()  # of (Formula, frozenset[Atom], frozenset[Atom])

    def delta_key(self):
        return (tuple(sorted(self.add)), tuple(sorted(self.delete)))


@dataclass(frozen=True)
class GroundCapability:
    name: str
    args: tuple
    precondition: Formula  # ground
    outcomes: tuple  # of GroundOutcome

    @property
    def key(self):
        return (self.name,) + self.args


def ground_outcome(out: EffectOutcome, binding: dict) -> GroundOutcome:
    conds = tuple(
        (
            substitute_formula(c.condition, binding),
            ground_atoms(c.add, binding),
            ground_atoms(c.delete, binding),
        )
        for c in out.conditionals
    )
    return GroundOutcome(
        ground_atoms(out.add, binding),
        ground_atoms(out.delete, binding),
        out.probability,
        conds,
    )


def bind_capability(cap: CapabilitySchema, args) -> GroundCapability:
    binding = dict(zip(cap.param_names, args))
    return GroundCapability(
        cap.name,
        tuple(args),
        substitute_formula(cap.precondition, binding),
        tuple(ground_outcome(o, binding) for o in cap.outcomes),
    )


def type_consistent_bindings(cap: CapabilitySchema, objects: dict) -> list:
    """All argument tuples matching the parameter types, in object order."""
    pools = []
    for _, ptype in cap.params:
        pool = [o for o, t in objects.items() if t == ptype or ptype == "object"]
        pools.append(pool)
    return [tuple(combo) for combo in product(*pools)]


def ground_capability(cap: CapabilitySchema, objects: dict) -> list:
    return [bind_capability(cap, args) for args in type_consistent_bindings(cap, objects)]


def ground_domain(domain: DomainSpec, objects: dict) -> dict:
    """All ground capabilities, keyed by (name, *args)."""
    out = {}
    for cap in domain.capabilities.values():
        for g in ground_capability(cap, objects):
            out[g.key] = g
    return out


def atom_universe(domain: DomainSpec, objects: dict) -> list:
    """Every well-typed ground atom, in predicate-then-object order."""
    out = []
    for pred in domain.predicates.values():
        pools = [
            [o for o, t in objects.items() if t == pt or pt == "object"]
            for pt in pred.param_types
        ]
        for combo in product(*pools):
            out.append((pred.name,) + combo)
    return out


def apply_outcome(state: frozenset, outcome: GroundOutcome) -> frozenset:
    """s' = (s minus deletes) union adds; `when` clauses fire against the
    pre-state simultaneously with the unconditional part."""
    adds = set(outcome.add)
    dels = set(outcome.delete)
    for cond, cadd, cdel in outcome.conditionals:
        if holds(state, cond):
            adds |= cadd
            dels |= cdel
    return frozenset((state - dels) | adds)


def applicable(state: frozenset, cap: GroundCapability) -> bool:
    return holds(state, cap.precondition)


def successors(state: frozenset, cap: GroundCapability) -> list:
    return [apply_outcome(state, o) for o in cap.outcomes]


def lift_delta(pre: frozenset, post: frozenset, params, args) -> Optional[tuple]:
    """Lifts a ground transition delta through the executed binding.

    Returns (add, delete) frozensets of positive lifted literals, or None
    when the delta is not expressible: a changed atom mentions an object
    outside the binding, or an object the binding maps ambiguously (bound to
    several parameters).
    """
    reverse: dict = {}
    for p, o in zip(params, args):
        reverse.setdefault(o, []).append(p)

    def lift_atom(atom: Atom) -> Optional[Lit]:
        lifted_args = []
        for obj in atom[1:]:
            candidates = reverse.get(obj)
            if candidates is None or len(candidates) > 1:
                return None
            lifted_args.append(candidates[0])
        return Lit(atom[0], tuple(lifted_args))

    add, delete = set(), set()
    for atom in post - pre:
        lit = lift_atom(atom)
        if lit is None:
            return None
        add.add(lit)
    for atom in pre - post:
        lit = lift_atom(atom)
        if lit is None:
            return None
        delete.add(lit)
    return frozenset(add), frozenset(delete)
