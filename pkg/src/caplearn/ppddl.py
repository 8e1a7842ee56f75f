"""PPDDL subset: types, parser, and normalized serializer.

Supported fragment: typing, strips, negative preconditions, disjunctive
preconditions (`or`), probabilistic effects, `oneof` effects, and
conditional effects (`when`) inside outcomes.  This is the minimal closure
over the bundled benchmark domains plus the compiled two-copy domains used
for query synthesis.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Optional, Union

PROB_TOLERANCE = 1e-9

# A ground atom is a flat tuple: (predicate, obj1, obj2, ...).
Atom = tuple


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class Lit(NamedTuple):
    """A literal over capability parameters (lifted) or objects (ground)."""

    pred: str
    args: tuple
    negated: bool = False

    def negate(self) -> "Lit":
        return Lit(self.pred, self.args, not self.negated)

    def atom(self) -> Atom:
        return (self.pred,) + tuple(self.args)


@dataclass(frozen=True)
class And:
    children: tuple = ()


@dataclass(frozen=True)
class Or:
    children: tuple = ()


# Formula = Lit | And | Or (nested).
Formula = Union[Lit, And, Or]

TRUE = And()
FALSE = Or()


def holds(state: frozenset, formula: Formula) -> bool:
    """Closed-world evaluation of a ground formula on a set of true atoms."""
    if isinstance(formula, Lit):
        return (formula.atom() in state) != formula.negated
    if isinstance(formula, And):
        return all(holds(state, c) for c in formula.children)
    if isinstance(formula, Or):
        return any(holds(state, c) for c in formula.children)
    raise TypeError(f"not a formula: {formula!r}")


def formula_literals(formula: Formula) -> list:
    """All literal leaves, left to right."""
    if isinstance(formula, Lit):
        return [formula]
    return [lit for child in formula.children for lit in formula_literals(child)]


def conjunction_literals(formula: Formula) -> tuple:
    """The literals of a pure conjunction (a Lit or an And of Lits)."""
    if isinstance(formula, Lit):
        return (formula,)
    if isinstance(formula, And):
        out = []
        for c in formula.children:
            out.extend(conjunction_literals(c))
        return tuple(out)
    raise ValueError(f"not a conjunction: {formula!r}")


class ConditionalEffect(NamedTuple):
    condition: Formula
    add: frozenset  # of positive Lit
    delete: frozenset


@dataclass(frozen=True)
class EffectOutcome:
    """One outcome set: literals added/deleted, with optional probability.

    probability is None in FOND mode.  conditionals hold `when` clauses,
    which appear only in compiled query domains.
    """

    add: frozenset = frozenset()
    delete: frozenset = frozenset()
    probability: Optional[float] = None
    conditionals: tuple = ()

    def delta_key(self):
        return (tuple(sorted(self.add)), tuple(sorted(self.delete)))


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    param_types: tuple

    @property
    def arity(self) -> int:
        return len(self.param_types)


@dataclass(frozen=True)
class CapabilitySchema:
    name: str
    params: tuple  # of (param_name, type_name)
    precondition: Formula
    outcomes: tuple  # of EffectOutcome
    mode: str = "probabilistic"  # or "fond"

    @property
    def param_names(self) -> tuple:
        return tuple(p for p, _ in self.params)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class DomainSpec:
    name: str
    requirements: tuple
    types: tuple
    predicates: dict  # name -> PredicateSchema, insertion ordered
    capabilities: dict  # name -> CapabilitySchema

    def predicate_list(self) -> tuple:
        return tuple(self.predicates.values())


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domain_name: str
    objects: dict  # object name -> type name, insertion ordered
    init: frozenset  # of Atom
    goal: Formula


# ---------------------------------------------------------------------------
# Tokenizer / s-expression reader
# ---------------------------------------------------------------------------


class _Tok(NamedTuple):
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    toks = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            col += 1
            i += 1
            continue
        if ch in "()":
            toks.append(_Tok(ch, line, col))
            col += 1
            i += 1
            continue
        start = i
        start_col = col
        while i < n and text[i] not in " \t\r\n();":
            i += 1
            col += 1
        toks.append(_Tok(text[start:i].lower(), line, start_col))
    return toks


def _read_sexp(toks: list, pos: int):
    """Returns (node, next_pos); node is a _Tok or a list with .line/.col via first token."""
    if pos >= len(toks):
        raise ParseError("unexpected end of input", toks[-1].line if toks else 0, 0)
    tok = toks[pos]
    if tok.text == "(":
        items = []
        pos += 1
        while True:
            if pos >= len(toks):
                raise ParseError("unbalanced parenthesis", tok.line, tok.col)
            if toks[pos].text == ")":
                return (items, tok), pos + 1
            node, pos = _read_sexp(toks, pos)
            items.append(node)
    if tok.text == ")":
        raise ParseError("unexpected ')'", tok.line, tok.col)
    return tok, pos + 1


def _parse_all(text: str):
    toks = _tokenize(text)
    nodes = []
    pos = 0
    while pos < len(toks):
        node, pos = _read_sexp(toks, pos)
        nodes.append(node)
    return nodes


def _is_list(node) -> bool:
    return isinstance(node, tuple) and isinstance(node[0], list)


def _items(node) -> list:
    return node[0]


def _loc(node) -> tuple:
    if _is_list(node):
        return node[1].line, node[1].col
    return node.line, node.col


def _head(node) -> str:
    if not _is_list(node) or not _items(node) or _is_list(_items(node)[0]):
        raise ParseError("expected a named list", *_loc(node))
    return _items(node)[0].text


def _err(node, msg: str):
    raise ParseError(msg, *_loc(node))


# ---------------------------------------------------------------------------
# Domain parsing
# ---------------------------------------------------------------------------

_KNOWN_REQUIREMENTS = {
    ":typing",
    ":strips",
    ":probabilistic-effects",
    ":non-deterministic",
    ":negative-preconditions",
    ":disjunctive-preconditions",
    ":conditional-effects",
    ":equality",
}


def _parse_typed_list(nodes: list, default_type: str = "object"):
    """Parses `a b - t c d - u` into [(a, t), (b, t), (c, u), (d, u)]."""
    out = []
    pending = []
    i = 0
    while i < len(nodes):
        node = nodes[i]
        if _is_list(node):
            _err(node, "expected a name in typed list")
        if node.text == "-":
            if i + 1 >= len(nodes) or _is_list(nodes[i + 1]):
                _err(node, "dangling '-' in typed list")
            tname = nodes[i + 1].text
            out.extend((p, tname) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(node.text)
        i += 1
    out.extend((p, default_type) for p in pending)
    return out


def _parse_literal(node, preds: dict, scope, where: str) -> Lit:
    if not _is_list(node) or not _items(node):
        _err(node, f"expected a literal in {where}")
    items = _items(node)
    if items[0].text == "not":
        if len(items) != 2:
            _err(node, "'not' takes exactly one literal")
        inner = _parse_literal(items[1], preds, scope, where)
        return inner.negate()
    name = items[0].text
    if name not in preds:
        _err(node, f"undeclared predicate '{name}'")
    args = tuple(t.text for t in items[1:])
    if len(args) != preds[name].arity:
        _err(node, f"arity mismatch for '{name}': got {len(args)}, want {preds[name].arity}")
    if scope is not None:
        for a in args:
            if a not in scope:
                _err(node, f"unknown term '{a}' in {where}")
    return Lit(name, args)


def _parse_formula(node, preds: dict, scope, where: str) -> Formula:
    if _is_list(node) and _items(node):
        head = _items(node)[0]
        if not _is_list(head):
            if head.text == "and":
                return And(tuple(_parse_formula(c, preds, scope, where) for c in _items(node)[1:]))
            if head.text == "or":
                return Or(tuple(_parse_formula(c, preds, scope, where) for c in _items(node)[1:]))
            if head.text == "not":
                if len(_items(node)) != 2:
                    _err(node, "'not' takes one argument")
                inner = _parse_formula(_items(node)[1], preds, scope, where)
                if isinstance(inner, Lit):
                    return inner.negate()
                _err(node, "negation is only supported on literals")
    if _is_list(node) and not _items(node):
        return TRUE
    return _parse_literal(node, preds, scope, where)


def _split_effect_literals(lits: Iterable, node) -> tuple:
    add, delete = set(), set()
    for lit in lits:
        target = delete if lit.negated else add
        target.add(Lit(lit.pred, lit.args))
    both = {l for l in add} & {l for l in delete}
    if both:
        _err(node, f"literal added and deleted in the same outcome: {sorted(both)}")
    return frozenset(add), frozenset(delete)


def _parse_outcome_body(node, preds: dict, scope) -> tuple:
    """One outcome body: conjunction of literals and `when` clauses.

    Returns (add, delete, conditionals).
    """
    lits, conds = [], []

    def walk(n):
        if _is_list(n) and _items(n) and not _is_list(_items(n)[0]):
            h = _items(n)[0].text
            if h == "and":
                for c in _items(n)[1:]:
                    walk(c)
                return
            if h == "when":
                if len(_items(n)) != 3:
                    _err(n, "'when' takes a condition and an effect")
                cond = _parse_formula(_items(n)[1], preds, scope, "when condition")
                inner = _parse_outcome_body(_items(n)[2], preds, scope)
                if inner[2]:
                    _err(n, "nested 'when' is not supported")
                conds.append(ConditionalEffect(cond, inner[0], inner[1]))
                return
        lits.append(_parse_literal(n, preds, scope, "effect"))

    walk(node)
    add, delete = _split_effect_literals(lits, node)
    return add, delete, tuple(conds)


def _parse_effect(node, preds: dict, scope) -> tuple:
    """Parses an effect tree into (outcomes, mode).

    Grammar: (and det* [probabilistic-block*]) | (probabilistic ...)
           | (oneof body*) | body.
    Probabilistic branches are folded over the deterministic part; residual
    mass below 1 becomes an explicit no-change branch over the deterministic
    literals.
    """
    if _is_list(node) and _items(node) and not _is_list(_items(node)[0]):
        h = _items(node)[0].text
        if h == "oneof":
            outs = []
            for branch in _items(node)[1:]:
                add, delete, conds = _parse_outcome_body(branch, preds, scope)
                outs.append(EffectOutcome(add, delete, None, conds))
            if not outs:
                _err(node, "'oneof' needs at least one branch")
            return tuple(outs), "fond"
        if h == "and" or h == "probabilistic":
            det_lits, det_conds, blocks = [], [], []
            nodes = _items(node)[1:] if h == "and" else [node]

            def collect(n):
                if _is_list(n) and _items(n) and not _is_list(_items(n)[0]):
                    hh = _items(n)[0].text
                    if hh == "probabilistic":
                        items = _items(n)[1:]
                        if len(items) % 2 != 0:
                            _err(n, "'probabilistic' takes probability/effect pairs")
                        pairs = []
                        for k in range(0, len(items), 2):
                            ptok = items[k]
                            if _is_list(ptok):
                                _err(ptok, "expected a probability")
                            try:
                                p = float(ptok.text)
                            except ValueError:
                                _err(ptok, f"bad probability '{ptok.text}'")
                            if not (0.0 <= p <= 1.0):
                                _err(ptok, f"probability out of range: {p}")
                            body = _parse_outcome_body(items[k + 1], preds, scope)
                            pairs.append((p, body))
                        blocks.append((pairs, n))
                        return
                    if hh == "and":
                        for c in _items(n)[1:]:
                            collect(c)
                        return
                    if hh == "when":
                        add, delete, conds = _parse_outcome_body(n, preds, scope)
                        det_conds.extend(conds)
                        return
                det_lits.append(_parse_literal(n, preds, scope, "effect"))

            for n in nodes:
                collect(n)
            det_add, det_del = _split_effect_literals(det_lits, node)
            branches = [(1.0, det_add, det_del, tuple(det_conds))]
            for pairs, bnode in blocks:
                total = sum(p for p, _ in pairs)
                if total > 1.0 + PROB_TOLERANCE:
                    _err(bnode, f"probabilities sum to {total} > 1")
                expanded = list(pairs)
                if total < 1.0 - PROB_TOLERANCE:
                    residual = 1.0 - total
                    snapped = round(residual, 12)
                    if abs(snapped - residual) < PROB_TOLERANCE:
                        residual = snapped
                    expanded.append((residual, (frozenset(), frozenset(), ())))
                new_branches = []
                for bp, badd, bdel, bconds in branches:
                    for p, (add, delete, conds) in expanded:
                        new_branches.append(
                            (bp * p, badd | add, bdel | delete, bconds + conds)
                        )
                branches = new_branches
            outs = tuple(
                EffectOutcome(a, d, p, c) for p, a, d, c in branches
            )
            return outs, "probabilistic"
    # bare literal effect
    add, delete, conds = _parse_outcome_body(node, preds, scope)
    return (EffectOutcome(add, delete, 1.0, conds),), "probabilistic"


def _parse_capability(node, preds: dict, types: tuple,
                      fond_dialect: bool = False) -> CapabilitySchema:
    items = _items(node)
    if len(items) < 2 or _is_list(items[1]):
        _err(node, "capability needs a name")
    name = items[1].text
    params: tuple = ()
    precondition: Formula = TRUE
    effect_node = None
    i = 2
    while i < len(items):
        key = items[i]
        if _is_list(key):
            _err(key, "expected a keyword")
        if key.text == ":parameters":
            plist = items[i + 1]
            if not _is_list(plist):
                _err(plist, ":parameters needs a list")
            params = tuple(_parse_typed_list(_items(plist)))
            for _, t in params:
                if types and t not in types and t != "object":
                    _err(plist, f"undeclared type '{t}'")
            i += 2
        elif key.text == ":precondition":
            scope = {p for p, _ in params}
            precondition = _parse_formula(items[i + 1], preds, scope, "precondition")
            i += 2
        elif key.text == ":effect":
            effect_node = items[i + 1]
            i += 2
        else:
            _err(key, f"unknown capability keyword '{key.text}'")
    if effect_node is None:
        outcomes, mode = (EffectOutcome(frozenset(), frozenset(), 1.0),), "probabilistic"
    else:
        scope = {p for p, _ in params}
        outcomes, mode = _parse_effect(effect_node, preds, scope)
    if mode == "probabilistic" and fond_dialect:
        # a nondeterministic-dialect effect without `oneof` is a single
        # unweighted outcome, not a degenerate probability-1 branch
        if len(outcomes) != 1:
            _err(node, f"probabilistic effect in non-deterministic domain '{name}'")
        outcomes = (replace(outcomes[0], probability=None),)
        mode = "fond"
    if mode == "probabilistic":
        total = sum(o.probability for o in outcomes)
        if abs(total - 1.0) > PROB_TOLERANCE:
            _err(node, f"outcome probabilities of '{name}' sum to {total}")
    return CapabilitySchema(name, params, precondition, outcomes, mode)


def parse_domain(text: str) -> DomainSpec:
    nodes = _parse_all(text)
    if len(nodes) != 1 or _head(nodes[0]) != "define":
        raise ParseError("expected a single (define (domain ...))", 1, 1)
    items = _items(nodes[0])
    if len(items) < 2 or _head(items[1]) != "domain":
        _err(nodes[0], "expected (domain <name>)")
    name = _items(items[1])[1].text
    requirements: tuple = ()
    types: tuple = ()
    predicates: dict = {}
    capabilities: dict = {}
    for section in items[2:]:
        h = _head(section)
        if h == ":requirements":
            reqs = []
            for r in _items(section)[1:]:
                if r.text not in _KNOWN_REQUIREMENTS:
                    _err(r, f"unknown requirement '{r.text}'")
                reqs.append(r.text)
            requirements = tuple(reqs)
        elif h == ":types":
            types = tuple(n for n, _ in _parse_typed_list(_items(section)[1:]))
        elif h == ":predicates":
            for pnode in _items(section)[1:]:
                if not _is_list(pnode) or not _items(pnode):
                    _err(pnode, "bad predicate declaration")
                pname = _items(pnode)[0].text
                typed = _parse_typed_list(_items(pnode)[1:])
                for _, t in typed:
                    if types and t not in types and t != "object":
                        _err(pnode, f"undeclared type '{t}'")
                if pname in predicates:
                    _err(pnode, f"duplicate predicate '{pname}'")
                predicates[pname] = PredicateSchema(pname, tuple(t for _, t in typed))
        elif h in (":action", ":capability"):
            fond_dialect = (":non-deterministic" in requirements
                            and ":probabilistic-effects" not in requirements)
            cap = _parse_capability(section, predicates, types, fond_dialect)
            if cap.name in capabilities:
                _err(section, f"duplicate capability '{cap.name}'")
            capabilities[cap.name] = cap
        else:
            _err(section, f"unknown domain section '{h}'")
    return DomainSpec(name, requirements, types, predicates, capabilities)


# ---------------------------------------------------------------------------
# Problem parsing
# ---------------------------------------------------------------------------


def _check_atom_types(atom: Atom, domain: DomainSpec, objects: dict, node):
    pred = domain.predicates.get(atom[0])
    if pred is None:
        _err(node, f"undeclared predicate '{atom[0]}'")
    if len(atom) - 1 != pred.arity:
        _err(node, f"arity mismatch for '{atom[0]}'")
    for obj, want in zip(atom[1:], pred.param_types):
        got = objects.get(obj)
        if got is None:
            _err(node, f"undeclared object '{obj}'")
        if want != "object" and got != want:
            _err(node, f"ill-typed atom {atom}: {obj} is {got}, want {want}")


def parse_problem(text: str, domain: DomainSpec) -> ProblemSpec:
    nodes = _parse_all(text)
    if len(nodes) != 1 or _head(nodes[0]) != "define":
        raise ParseError("expected a single (define (problem ...))", 1, 1)
    items = _items(nodes[0])
    if len(items) < 2 or _head(items[1]) != "problem":
        _err(nodes[0], "expected (problem <name>)")
    name = _items(items[1])[1].text
    domain_name = ""
    objects: dict = {}
    init: set = set()
    goal: Formula = TRUE
    for section in items[2:]:
        h = _head(section)
        if h == ":domain":
            domain_name = _items(section)[1].text
            if domain_name != domain.name:
                _err(section, f"problem references domain '{domain_name}', not '{domain.name}'")
        elif h == ":objects":
            for oname, otype in _parse_typed_list(_items(section)[1:]):
                if domain.types and otype not in domain.types and otype != "object":
                    _err(section, f"undeclared object type '{otype}'")
                objects[oname] = otype
        elif h == ":init":
            for anode in _items(section)[1:]:
                if not _is_list(anode) or not _items(anode):
                    _err(anode, "bad init atom")
                atom = tuple(t.text for t in _items(anode))
                _check_atom_types(atom, domain, objects, anode)
                init.add(atom)
        elif h == ":goal":
            goal = _parse_formula(_items(section)[1], domain.predicates, None, "goal")
            for lit in formula_literals(goal):
                _check_atom_types(lit.atom(), domain, objects, section)
        else:
            _err(section, f"unknown problem section '{h}'")
    return ProblemSpec(name, domain.name, objects, frozenset(init), goal)


# ---------------------------------------------------------------------------
# Serializer (normal form: lowercase, two-space indent)
# ---------------------------------------------------------------------------


def _fmt_prob(p: float) -> str:
    return repr(p)


def _fmt_lit(lit: Lit) -> str:
    inner = "(" + " ".join((lit.pred,) + tuple(lit.args)) + ")"
    return f"(not {inner})" if lit.negated else inner


def format_formula(f: Formula) -> str:
    if isinstance(f, Lit):
        return _fmt_lit(f)
    if isinstance(f, And):
        if not f.children:
            return "(and)"
        return "(and " + " ".join(format_formula(c) for c in f.children) + ")"
    if isinstance(f, Or):
        if not f.children:
            return "(or)"
        return "(or " + " ".join(format_formula(c) for c in f.children) + ")"
    raise TypeError(f"not a formula: {f!r}")


def _fmt_typed(pairs) -> str:
    return " ".join(f"{n} - {t}" for n, t in pairs)


def _fmt_outcome_body(out: EffectOutcome) -> str:
    parts = [_fmt_lit(l) for l in sorted(out.add)]
    parts += [_fmt_lit(l.negate()) for l in sorted(out.delete)]
    for cond in out.conditionals:
        body = [_fmt_lit(l) for l in sorted(cond.add)]
        body += [_fmt_lit(l.negate()) for l in sorted(cond.delete)]
        parts.append(f"(when {format_formula(cond.condition)} (and {' '.join(body)}))"
                     if body else f"(when {format_formula(cond.condition)} (and))")
    return "(and " + " ".join(parts) + ")" if parts else "(and)"


def _fmt_effect(cap: CapabilitySchema) -> str:
    outs = cap.outcomes
    if cap.mode == "fond":
        if len(outs) == 1 and not outs[0].conditionals and not outs[0].add and not outs[0].delete:
            return "(and)"
        if len(outs) == 1:
            return _fmt_outcome_body(outs[0])
        return "(oneof " + " ".join(_fmt_outcome_body(o) for o in outs) + ")"
    if len(outs) == 1:
        return _fmt_outcome_body(outs[0])
    # Factor the common deterministic part back out when every outcome shares it.
    common_add = frozenset.intersection(*[o.add for o in outs])
    common_del = frozenset.intersection(*[o.delete for o in outs])
    parts = [_fmt_lit(l) for l in sorted(common_add)]
    parts += [_fmt_lit(l.negate()) for l in sorted(common_del)]
    branches = []
    residual = None
    for o in outs:
        add, delete = o.add - common_add, o.delete - common_del
        if not add and not delete:
            residual = o
            continue
        body = [_fmt_lit(l) for l in sorted(add)]
        body += [_fmt_lit(l.negate()) for l in sorted(delete)]
        branches.append(f"{_fmt_prob(o.probability)} (and {' '.join(body)})")
    if residual is not None and residual.probability > PROB_TOLERANCE:
        # keep the no-change branch explicit so round-trips are stable
        branches.append(f"{_fmt_prob(residual.probability)} (and)")
    parts.append("(probabilistic " + " ".join(branches) + ")")
    return "(and " + " ".join(parts) + ")"


def domain_to_str(domain: DomainSpec) -> str:
    lines = [f"(define (domain {domain.name})"]
    if domain.requirements:
        lines.append("  (:requirements " + " ".join(domain.requirements) + ")")
    if domain.types:
        lines.append("  (:types " + " ".join(domain.types) + ")")
    if domain.predicates:
        lines.append("  (:predicates")
        for pred in domain.predicates.values():
            args = " ".join(
                f"?v{i} - {t}" for i, t in enumerate(pred.param_types)
            )
            lines.append(f"    ({pred.name}{(' ' + args) if args else ''})")
        lines.append("  )")
    for cap in domain.capabilities.values():
        lines.append(f"  (:action {cap.name}")
        lines.append(f"    :parameters ({_fmt_typed(cap.params)})")
        lines.append(f"    :precondition {format_formula(cap.precondition)}")
        lines.append(f"    :effect {_fmt_effect(cap)}")
        lines.append("  )")
    lines.append(")")
    return "\n".join(lines) + "\n"


def problem_to_str(problem: ProblemSpec) -> str:
    lines = [f"(define (problem {problem.name})"]
    lines.append(f"  (:domain {problem.domain_name})")
    if problem.objects:
        lines.append("  (:objects " + _fmt_typed(problem.objects.items()) + ")")
    lines.append("  (:init")
    for atom in sorted(problem.init):
        lines.append("    (" + " ".join(atom) + ")")
    lines.append("  )")
    lines.append(f"  (:goal {format_formula(problem.goal)})")
    lines.append(")")
    return "\n".join(lines) + "\n"
