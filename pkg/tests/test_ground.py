"""Grounding, instantiation, state-update, and formula-evaluation tests."""
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from caplearn.benchmarks import BENCHMARK_NAMES, load_benchmark
from caplearn.ground import (
    apply_outcome,
    atom_universe,
    bind_capability,
    ground_capability,
    ground_domain,
    instantiated_literals,
    lift_delta,
)
from caplearn.ppddl import (
    And,
    CapabilitySchema,
    Lit,
    Or,
    PredicateSchema,
    holds,
    parse_domain,
)


def _cap(name, params):
    return CapabilitySchema(name, tuple(params), And(), (), "fond")


class TestInstantiatedLiterals:
    def test_connected_over_two_parameter_capability(self):
        move = _cap("move-vehicle", [("?src", "loc"), ("?dest", "loc")])
        connected = PredicateSchema("connected", ("loc", "loc"))
        lits = instantiated_literals(move, [connected])
        assert set(lits) == {
            Lit("connected", ("?src", "?dest")),
            Lit("connected", ("?dest", "?src")),
            Lit("connected", ("?src", "?src")),
            Lit("connected", ("?dest", "?dest")),
        }

    def test_zero_arity_predicate_yields_one(self):
        cap = _cap("c", [("?a", "t"), ("?b", "t")])
        assert instantiated_literals(cap, [PredicateSchema("flag", ())]) == [
            Lit("flag", ())
        ]

    def test_arity_two_predicate_three_parameter_capability(self):
        cap = _cap("c", [("?a", "t"), ("?b", "t"), ("?c", "t")])
        pred = PredicateSchema("r", ("t", "t"))
        lits = instantiated_literals(cap, [pred])
        # brute-force enumeration of all slot assignments
        expected = {
            Lit("r", combo)
            for combo in itertools.product(("?a", "?b", "?c"), repeat=2)
        }
        assert set(lits) == expected
        assert len(lits) == 9

    @pytest.mark.parametrize("name", BENCHMARK_NAMES)
    def test_count_formula_on_all_bundled_domains(self, name):
        entry = load_benchmark(name)
        preds = entry.domain.predicate_list()
        for cap in entry.domain.capabilities.values():
            lits = instantiated_literals(cap, preds)
            expected = sum(cap.arity ** p.arity for p in preds)
            assert len(lits) == expected

    @given(cap_arity=st.integers(0, 4), pred_arity=st.integers(0, 3))
    def test_count_is_cap_arity_to_the_pred_arity(self, cap_arity, pred_arity):
        cap = _cap("c", [(f"?x{i}", "t") for i in range(cap_arity)])
        pred = PredicateSchema("p", ("t",) * pred_arity)
        lits = instantiated_literals(cap, [pred])
        assert len(lits) == cap_arity ** pred_arity


class TestGroundCapability:
    def test_move_vehicle_over_six_locations(self):
        entry = load_benchmark("driver")
        move = entry.domain.capabilities["move-vehicle"]
        grounded = ground_capability(move, entry.train.objects)
        assert len(grounded) == 36  # 6 x 6 bindings, repetition included

    def test_zero_parameter_capability_grounds_to_itself(self):
        domain = parse_domain(
            "(define (domain d) (:predicates (p))"
            " (:action a :parameters () :precondition (p) :effect (not (p))))"
        )
        grounded = ground_capability(domain.capabilities["a"], {"o": "object"})
        assert len(grounded) == 1
        assert grounded[0].args == ()

    def test_two_locations_three_items(self):
        entry = load_benchmark("cafe")
        pick = entry.domain.capabilities["pick-item"]
        objects = {"l1": "location", "l2": "location",
                   "i1": "item", "i2": "item", "i3": "item"}
        assert len(ground_capability(pick, objects)) == 6

    def test_grounding_respects_types(self):
        entry = load_benchmark("first_responder")
        drive = entry.domain.capabilities["drive-fire-unit"]
        grounded = ground_capability(drive, entry.train.objects)
        # one fire unit, two locations
        assert len(grounded) == 1 * 2 * 2


class TestApplyOutcome:
    def test_pick_item_first_outcome(self):
        entry = load_benchmark("cafe")
        pick = bind_capability(entry.domain.capabilities["pick-item"], ("t", "i"))
        grab = max(pick.outcomes, key=lambda o: o.probability)
        state = frozenset({
            ("empty-arm",), ("has-charge",), ("robot-at", "t"), ("at", "t", "i"),
        })
        result = apply_outcome(state, grab)
        assert result == frozenset({("has-charge",), ("robot-at", "t"), ("holding", "i")})

    def test_empty_outcome_is_identity(self):
        entry = load_benchmark("cafe")
        pick = bind_capability(entry.domain.capabilities["pick-item"], ("t", "i"))
        nothing = min(pick.outcomes, key=lambda o: o.probability)
        state = frozenset({("empty-arm",), ("robot-at", "t")})
        assert apply_outcome(state, nothing) == state

    def test_add_then_delete_restores_state(self):
        domain = parse_domain(
            "(define (domain d) (:predicates (p))"
            " (:action add :parameters () :precondition (and) :effect (p))"
            " (:action rem :parameters () :precondition (and) :effect (not (p))))"
        )
        add = bind_capability(domain.capabilities["add"], ()).outcomes[0]
        rem = bind_capability(domain.capabilities["rem"], ()).outcomes[0]
        state = frozenset({("q",)})
        assert apply_outcome(apply_outcome(state, add), rem) == state

    @pytest.mark.parametrize("name", BENCHMARK_NAMES)
    def test_never_leaves_atom_universe(self, name):
        entry = load_benchmark(name)
        universe = set(atom_universe(entry.domain, entry.train.objects))
        assert entry.train.init <= universe
        state = entry.train.init
        for cap in ground_domain(entry.domain, entry.train.objects).values():
            if not holds(state, cap.precondition):
                continue
            for outcome in cap.outcomes:
                assert apply_outcome(state, outcome) <= universe


class TestHolds:
    def test_negated_literal_on_driver_init(self):
        entry = load_benchmark("driver")
        assert not holds(entry.train.init, Lit("not-flattire", (), True))
        assert holds(entry.train.init, Lit("not-flattire", ()))

    def test_empty_conjunction_true_empty_disjunction_false(self):
        assert holds(frozenset(), And())
        assert not holds(frozenset(), Or())

    @given(st.data())
    @settings(max_examples=200, deadline=None)
    def test_random_formula_matches_truth_table_oracle(self, data):
        atoms = [("a",), ("b",), ("c",), ("d",), ("e",)]

        def formulas(depth):
            leaf = st.builds(
                lambda i, neg: Lit(atoms[i][0], (), neg),
                st.integers(0, len(atoms) - 1),
                st.booleans(),
            )
            if depth == 0:
                return leaf
            sub = formulas(depth - 1)
            return st.one_of(
                leaf,
                st.builds(lambda cs: And(tuple(cs)), st.lists(sub, max_size=3)),
                st.builds(lambda cs: Or(tuple(cs)), st.lists(sub, max_size=3)),
            )

        formula = data.draw(formulas(2))
        truth = data.draw(st.sets(st.sampled_from(atoms)))
        state = frozenset(truth)

        def oracle(f):
            if isinstance(f, Lit):
                return (f.atom() in state) != f.negated
            rows = [oracle(c) for c in f.children]
            return all(rows) if isinstance(f, And) else any(rows)

        assert holds(state, formula) == oracle(formula)


class TestLiftDelta:
    def test_lifts_through_binding(self):
        pre = frozenset({("at", "t", "i"), ("empty-arm",)})
        post = frozenset({("holding", "i")})
        add, delete = lift_delta(pre, post, ("?l", "?i"), ("t", "i"))
        assert add == frozenset({Lit("holding", ("?i",))})
        assert delete == frozenset({Lit("at", ("?l", "?i")), Lit("empty-arm", ())})

    def test_foreign_object_not_liftable(self):
        pre = frozenset()
        post = frozenset({("p", "other")})
        assert lift_delta(pre, post, ("?x",), ("o",)) is None

    def test_repeated_binding_ambiguous_only_when_delta_touches_it(self):
        pre = frozenset({("q",)})
        post = frozenset()
        # delta only touches a 0-ary atom: liftable despite the repeated object
        assert lift_delta(pre, post, ("?a", "?b"), ("o", "o")) == (
            frozenset(), frozenset({Lit("q", ())})
        )
        assert lift_delta(
            frozenset(), frozenset({("p", "o")}), ("?a", "?b"), ("o", "o")
        ) is None
