"""Bundled benchmark integrity: sizes, identifiability, reachability."""
import pytest

from caplearn.benchmarks import (
    BENCHMARK_NAMES,
    BenchmarkError,
    load_benchmark,
    reachable_states,
    verify_identifiability,
)
from caplearn.ground import atom_universe
from caplearn.ppddl import Lit, parse_domain, parse_problem

EXPECTED_SIZES = {
    "cafe": (5, 4),
    "warehouse": (8, 4),
    "driver": (4, 2),
    "first_responder": (13, 10),
    "elevator": (12, 10),
}


class TestLoading:
    @pytest.mark.parametrize("name", BENCHMARK_NAMES)
    def test_sizes_match_expectations(self, name):
        entry = load_benchmark(name)
        preds, caps = EXPECTED_SIZES[name]
        assert len(entry.domain.predicates) == preds
        assert len(entry.domain.capabilities) == caps

    def test_unknown_name_rejected(self):
        with pytest.raises(BenchmarkError, match="unknown benchmark"):
            load_benchmark("blocksworld")

    def test_driver_flat_tire_probability(self):
        entry = load_benchmark("driver")
        move = entry.domain.capabilities["move-vehicle"]
        flat = [o for o in move.outcomes if Lit("not-flattire", ()) in o.delete]
        assert len(flat) == 1
        assert flat[0].probability == 0.8

    def test_warehouse_capability_names(self):
        entry = load_benchmark("warehouse")
        assert set(entry.domain.capabilities) == {"stack", "unstack", "pick", "place"}

    @pytest.mark.parametrize("name", BENCHMARK_NAMES)
    def test_training_problem_small_tests_doubled(self, name):
        entry = load_benchmark(name)
        assert len(entry.train.objects) <= 7
        for test in entry.tests:
            assert len(test.objects) == 2 * len(entry.train.objects)

    @pytest.mark.parametrize("name", BENCHMARK_NAMES)
    def test_ground_atom_budget(self, name):
        entry = load_benchmark(name)
        assert len(atom_universe(entry.domain, entry.train.objects)) <= 10**6


class TestIdentifiability:
    def test_worked_example_witness(self):
        # pre {p1 & p2 & not p3}; three outcomes distinguished from {p1,p2,p4}
        domain = parse_domain(
            "(define (domain ident) (:predicates (p1) (p2) (p3) (p4))"
            " (:action a :parameters ()"
            " :precondition (and (p1) (p2) (not (p3)))"
            " :effect (probabilistic"
            "   0.2 (and (p3) (p4))"
            "   0.5 (and (p3) (not (p2)))"
            "   0.3 (and (p3) (not (p4)) (not (p2))))))"
        )
        problem = parse_problem(
            "(define (problem i1) (:domain ident) (:init (p1) (p2) (p4))"
            " (:goal (and)))", domain,
        )
        from caplearn.benchmarks import BenchmarkEntry

        entry = BenchmarkEntry("ident", domain, problem, (), 4, 1)
        witnesses = verify_identifiability(entry)
        state, args = witnesses["a"]
        assert state == frozenset({("p1",), ("p2",), ("p4",)})

    def test_duplicate_outcomes_have_no_witness(self):
        domain = parse_domain(
            "(define (domain dup) (:predicates (p) (q))"
            " (:action a :parameters () :precondition (p)"
            " :effect (probabilistic 0.5 (q) 0.5 (q))))"
        )
        problem = parse_problem(
            "(define (problem d1) (:domain dup) (:init (p)) (:goal (and)))",
            domain,
        )
        from caplearn.benchmarks import BenchmarkEntry

        entry = BenchmarkEntry("dup", domain, problem, (), 2, 1)
        assert verify_identifiability(entry)["a"] is None

    @pytest.mark.parametrize("name", BENCHMARK_NAMES)
    def test_all_bundled_capabilities_identifiable(self, name):
        entry = load_benchmark(name)
        witnesses = verify_identifiability(entry)
        missing = [c for c, w in witnesses.items() if w is None]
        assert not missing


class TestReachability:
    @pytest.mark.parametrize("name", BENCHMARK_NAMES)
    def test_every_capability_reachable_from_training_init(self, name):
        # the learner's pool seeding relies on shallow reachability
        entry = load_benchmark(name)
        from caplearn.ground import applicable, ground_domain
        from caplearn.ppddl import holds

        states = reachable_states(entry.domain, entry.train, limit=3000)
        grounded = ground_domain(entry.domain, entry.train.objects)
        for cap_name in entry.domain.capabilities:
            hits = any(
                applicable(state, cap)
                for state in states
                for cap in grounded.values()
                if cap.name == cap_name
            )
            assert hits, f"{cap_name} never applicable in reachable space"
