"""Model-pair compilation and distinguishing-query tests."""
import pytest

from caplearn.fond import solve_strong
from caplearn.ppddl import And, Lit, Or, PredicateSchema, domain_to_str, parse_domain
from caplearn.queries import (
    CapabilityView,
    NoQueryFromState,
    build_combined_domain,
    check_distinguishing,
    combine_models,
    divergence_holds,
    generate_query,
    project_i,
)

LOC = ("?frm", "loc"), ("?to", "loc")

PREDICATES = (
    PredicateSchema("has-charge", ()),
    PredicateSchema("robot-at", ("loc",)),
)


def _views(pre_i, pre_j, outcomes_i=(), outcomes_j=()):
    vi = CapabilityView("move-vehicle", LOC, tuple(pre_i), tuple(outcomes_i))
    vj = CapabilityView("move-vehicle", LOC, tuple(pre_j), tuple(outcomes_j))
    return {"move-vehicle": vi}, {"move-vehicle": vj}


HC = Lit("has-charge", ())
RA = Lit("robot-at", ("?frm",))


class TestCombinedDomainGolden:
    """The worked precondition-refinement example: model i requires the
    robot's position positively, model j negatively."""

    def _domain(self):
        views_i, views_j = _views((HC, RA), (HC, RA.negate()))
        return build_combined_domain(views_i, views_j, PREDICATES)

    def test_or_precondition(self):
        cap = self._domain().capabilities["move-vehicle_ij"]
        assert cap.precondition == Or((
            And((Lit("has-charge_i", ()), Lit("robot-at_i", ("?frm",)))),
            And((Lit("has-charge_j", ()), Lit("robot-at_j", ("?frm",), True))),
        ))

    def test_three_conditional_effects(self):
        cap = self._domain().capabilities["move-vehicle_ij"]
        (outcome,) = cap.outcomes
        both, only_i, only_j = outcome.conditionals
        # (i) both preconditions: apply both (empty) effects
        assert both.condition == And((
            Lit("has-charge_i", ()), Lit("robot-at_i", ("?frm",)),
            Lit("has-charge_j", ()), Lit("robot-at_j", ("?frm",), True),
        ))
        assert both.add == frozenset() and both.delete == frozenset()
        # (ii) i-side only: the j precondition negated as a disjunction
        assert only_i.condition == And((
            Lit("has-charge_i", ()), Lit("robot-at_i", ("?frm",)),
            Or((Lit("has-charge_j", (), True), Lit("robot-at_j", ("?frm",)))),
        ))
        assert only_i.add == frozenset({Lit("goal", ())})
        # (iii) j-side only
        assert only_j.condition == And((
            Lit("has-charge_j", ()), Lit("robot-at_j", ("?frm",), True),
            Or((Lit("has-charge_i", (), True), Lit("robot-at_i", ("?frm",), True))),
        ))
        assert only_j.add == frozenset({Lit("goal", ())})

    def test_goal_predicate_is_zero_ary_and_renaming_is_total(self):
        domain = self._domain()
        assert domain.predicates["goal"].arity == 0
        for pname in domain.predicates:
            assert pname == "goal" or pname.endswith("_i") or pname.endswith("_j")
        text = domain_to_str(domain)
        # every atom in the emitted text carries exactly one copy tag
        assert "(has-charge_i)" in text and "(has-charge_j)" in text
        assert "(robot-at_i ?frm)" in text and "(robot-at_j ?frm)" in text

    def test_emitted_text_reparses(self):
        domain = self._domain()
        assert parse_domain(domain_to_str(domain)) == domain


class TestCombineModels:
    def test_identical_models_rejected(self):
        views_i, _ = _views((HC,), (HC,))
        with pytest.raises(ValueError, match="exactly one"):
            combine_models(views_i, views_i, frozenset(), {"l1": "loc"})

    def test_initial_state_is_doubled(self):
        views_i, views_j = _views((HC,), (HC, RA))
        s0 = frozenset({("has-charge",), ("robot-at", "l1")})
        problem = combine_models(views_i, views_j, s0, {"l1": "loc"})
        assert ("has-charge_i",) in problem.initial
        assert ("has-charge_j",) in problem.initial
        assert ("robot-at_i", "l1") in problem.initial
        assert len(problem.initial) == 4

    def test_effect_difference_reaches_divergence_in_one_step(self):
        # both models agree on the precondition; model i also sets a flag
        out_i = ((frozenset({HC}), frozenset()),)
        out_j = ((frozenset(), frozenset()),)
        views_i, views_j = _views((RA,), (RA,), out_i, out_j)
        s0 = frozenset({("robot-at", "l1")})
        problem = combine_models(views_i, views_j, s0, {"l1": "loc"})
        policy = solve_strong(problem)
        from caplearn.fond import policy_depth, verify_strong

        assert verify_strong(problem, policy)
        assert policy_depth(problem, policy) == 1
        action = policy.mapping[problem.initial]
        from caplearn.ground import apply_outcome

        for outcome in action.outcomes:
            assert divergence_holds(apply_outcome(problem.initial, outcome))

    def test_projection_strips_the_copy(self):
        combined = frozenset({("has-charge_i",), ("robot-at_i", "l1"),
                              ("has-charge_j",), ("goal",)})
        assert project_i(combined) == frozenset(
            {("has-charge",), ("robot-at", "l1")}
        )


class TestGenerateQuery:
    def test_precondition_refinement_one_step_query(self):
        # the agent's true precondition includes the charge flag; candidates
        # differ in requiring it (T) versus ignoring it (I)
        views_t, views_i = _views((HC, RA), (RA,))
        s0 = frozenset({("robot-at", "l1")})  # charge absent
        plan = generate_query(
            views_t, views_i, s0, {"l1": "loc", "l2": "loc"},
            attempts=5, anchor=("move-vehicle", ("l1", "l2")),
        )
        assert plan.depth == 1
        assert plan.query.max_steps == 2  # cutoff = 2 x depth
        assert plan.query.attempts == 5
        assert plan.capability == "move-vehicle"
        assert plan.args == ("l1", "l2")
        assert plan.query.policy[s0] == ("move-vehicle", ("l1", "l2"))
        assert plan.distinguishing

    def test_unreachable_divergence_raises(self):
        # identical pre, both empty-effect models differ on an effect literal,
        # but the precondition can never hold from s0 and nothing else moves
        out_i = ((frozenset({HC}), frozenset()),)
        out_j = ((frozenset(), frozenset()),)
        views_i, views_j = _views((RA,), (RA,), out_i, out_j)
        s0 = frozenset()  # robot nowhere: the capability never applies
        with pytest.raises(NoQueryFromState):
            generate_query(views_i, views_j, s0, {"l1": "loc"}, attempts=5)

    def test_alpha_is_twice_depth_on_multistep_policies(self):
        # navigation first: a deterministic setup capability enables the
        # capability under test, giving a depth-2 strong policy
        setup = CapabilityView(
            "charge-up", (), (), ((frozenset({HC}), frozenset()),)
        )
        out_i = ((frozenset({Lit("robot-at", ("?to",))}), frozenset()),)
        out_j = ((frozenset(), frozenset()),)
        views_i, views_j = _views((HC,), (HC,), out_i, out_j)
        views_i["charge-up"] = setup
        views_j["charge-up"] = setup
        s0 = frozenset()
        plan = generate_query(views_i, views_j, s0, {"l1": "loc"}, attempts=3)
        assert plan.depth == 2
        assert plan.query.max_steps == 4
        assert plan.capability == "move-vehicle"
        assert plan.distinguishing

    def test_check_distinguishing_rejects_lockstep_policies(self):
        # a policy whose only action behaves identically under both models
        # must not count as distinguishing
        same = ((frozenset({HC}), frozenset()),)
        views_i, views_j = _views((RA,), (RA,), same, same)
        views_i["move-vehicle"] = views_i["move-vehicle"]._replace(
            precondition=(RA,))
        # make the pair differ somewhere else so compilation is legal
        other_i = CapabilityView("noop", (), (Lit("has-charge", ()),), ())
        other_j = CapabilityView("noop", (), (), ())
        views_i["noop"] = other_i
        views_j["noop"] = other_j
        s0 = frozenset({("robot-at", "l1")})
        problem = combine_models(views_i, views_j, s0, {"l1": "loc"})
        from caplearn.fond import FondAction, StrongPolicy

        lockstep = None
        for action in problem.iter_actions():
            if action.name == "move-vehicle":
                lockstep = action
                break
        policy = StrongPolicy({problem.initial: lockstep}, 1)
        assert not check_distinguishing(views_i, views_j, s0, policy)
