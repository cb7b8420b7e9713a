import math

import pytest

from polsynth.errors import InvalidDiscount, InvalidSpecification, NoIncumbent, NonIntegralPolicy
from polsynth.graph_analysis import preprocess_reachability
from polsynth.milp.branch_and_bound import INFEASIBLE_STATUS, OPTIMAL, SolveResult, solve
from polsynth.milp.encodings import (
    DISCOUNTED_LOWER,
    REACH_LOWER,
    TOTAL_COST,
    VMAX_MDP_VALUE,
    build_discounted_milp,
    build_reachability_milp,
    compute_vmax,
    default_cost_bound,
    stack_specifications,
)
from polsynth.milp.extraction import extract_policy
from polsynth.milp.model import Assignment, check_feasible
from polsynth.models.specification import GEQ, LEQ, Specification, SpecKind, SynthesisProblem
from polsynth.problem_file import parse_explicit_model
from polsynth.transforms import RandomizationMode, apply_randomization

from .conftest import benchmark_text


def test_mixing_pure_reachability_is_one_half(mixing):
    model, emap = build_reachability_milp(preprocess_reachability(mixing, {3}))
    result = solve(model)
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(0.5, abs=1e-9)
    assert check_feasible(model, result.assignment)
    assert model.has_variable("sigma[yellow,alpha]")
    assert model.has_variable("r[s2]")
    assert {c.name for c in model.constraints} >= {"choice[yellow]", "target[s4]", "flow[s2,beta]", "witness[s3,alpha]"}


def test_mixing_light_randomization_reaches_surely(mixing):
    randomized, catalog = apply_randomization(mixing, RandomizationMode.LIGHT)
    model, emap = build_reachability_milp(preprocess_reachability(randomized, {3}))
    result = solve(model)
    assert result.objective == pytest.approx(1.0, abs=1e-9)
    policy = extract_policy(result, emap)
    assert catalog.is_mixture(policy.action_for(randomized.observation_index("yellow")))


def test_discounted_encoding(shared_entry):
    model, emap = build_discounted_milp(shared_entry, 0.9)
    assert emap.vmax == pytest.approx(20.0)
    result = solve(model)
    # beta from s leads to the state paying 2 with probability 1/2
    assert result.objective == pytest.approx(0.9, abs=1e-6)
    policy = extract_policy(result, emap)
    assert policy.action_for(shared_entry.observation_index("white")) == shared_entry.mdp.action_index("beta")


def test_compute_vmax(shared_entry):
    assert compute_vmax(shared_entry, 0.9) == pytest.approx(20.0)
    assert compute_vmax(shared_entry, 0.9, VMAX_MDP_VALUE) == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(InvalidDiscount):
        compute_vmax(shared_entry, 1.0)
    with pytest.raises(ValueError):
        compute_vmax(shared_entry, 0.5, "guess")


def test_reach_threshold_row(mixing):
    reach = Specification(SpecKind.REACH_THRESHOLD, targets={3}, op=GEQ, bound=0.4)
    model, emap = stack_specifications(SynthesisProblem(mixing, [reach]))
    assert "threshold" in {c.name for c in model.constraints}
    assert solve(model).objective == pytest.approx(0.5, abs=1e-9)

    too_high = Specification(SpecKind.REACH_THRESHOLD, targets={3}, op=GEQ, bound=0.6)
    model, _ = stack_specifications(SynthesisProblem(mixing, [too_high]))
    assert solve(model).status == INFEASIBLE_STATUS


def test_upper_bounded_reachability_uses_the_lower_form(mixing):
    at_most = Specification(SpecKind.REACH_THRESHOLD, targets={3}, op=LEQ, bound=0.5)
    model, emap = stack_specifications(SynthesisProblem(mixing, [at_most]))
    assert emap.main.form == REACH_LOWER
    result = solve(model)
    assert result.objective == pytest.approx(0.5, abs=1e-9)

    strict = Specification(SpecKind.REACH_THRESHOLD, targets={3}, op=LEQ, bound=0.2)
    model, _ = stack_specifications(SynthesisProblem(mixing, [strict]))
    assert solve(model).status == INFEASIBLE_STATUS


def test_stacked_blocks_share_policy_variables(shared_entry):
    end = shared_entry.mdp.state_index("end")
    problem = SynthesisProblem(shared_entry, [
        Specification(SpecKind.DISC_REWARD_THRESHOLD, discount=0.9, op=LEQ, bound=0.5),
        Specification(SpecKind.REACH_MAX, targets={end}),
    ])
    model, emap = stack_specifications(problem)
    assert [block.tag for block in emap.blocks] == ["", "s2:"]
    assert emap.blocks[0].form == DISCOUNTED_LOWER
    assert emap.objective_block == 1
    assert model.has_variable("s2:p[end]")
    assert len([c for c in model.constraints if c.name.startswith("choice[")]) == shared_entry.num_observations
    result = solve(model)
    assert result.objective == pytest.approx(1.0, abs=1e-9)
    # the discounted reward must stay at most 0.5, which rules out beta
    policy = extract_policy(result, emap)
    assert policy.action_for(shared_entry.observation_index("white")) == shared_entry.mdp.action_index("alpha")


def test_explicit_optimize_index_drops_that_threshold(shared_entry):
    problem = SynthesisProblem(shared_entry, [
        Specification(SpecKind.DISC_REWARD_THRESHOLD, discount=0.9, op=GEQ, bound=5.0),
    ])
    model, _ = stack_specifications(problem)
    assert solve(model).status == INFEASIBLE_STATUS
    model, _ = stack_specifications(problem, optimize=0)
    assert "threshold" not in {c.name for c in model.constraints}
    assert solve(model).objective == pytest.approx(0.9, abs=1e-6)


def test_total_cost_encoding(shared_entry):
    end = shared_entry.mdp.state_index("end")
    problem = SynthesisProblem(shared_entry, [Specification(SpecKind.UNDISC_REWARD_MIN, targets={end})])
    model, emap = stack_specifications(problem)
    assert emap.main.form == TOTAL_COST
    assert emap.main.guard is not None
    assert "almost_sure" in {c.name for c in model.constraints}
    result = solve(model)
    assert result.objective == pytest.approx(0.5, abs=1e-6)


def test_total_cost_needs_nonnegative_costs():
    pomdp = parse_explicit_model(benchmark_text("shared_entry.model").replace("reward s1 alpha 1", "reward s1 alpha -1"))
    end = pomdp.mdp.state_index("end")
    with pytest.raises(InvalidSpecification):
        stack_specifications(SynthesisProblem(pomdp, [Specification(SpecKind.UNDISC_REWARD_MIN, targets={end})]))


def test_total_cost_without_sure_reachability_is_infeasible(mixing):
    # from s1 half of the mass reaches s4 at best
    problem = SynthesisProblem(mixing, [Specification(SpecKind.UNDISC_REWARD_MIN, targets={3})])
    model, _ = stack_specifications(problem)
    assert solve(model).status == INFEASIBLE_STATUS


def test_extraction_errors(mixing):
    model, emap = build_reachability_milp(preprocess_reachability(mixing, {3}))
    with pytest.raises(NoIncumbent):
        extract_policy(SolveResult(INFEASIBLE_STATUS), emap)
    values = {v.name: 0.0 for v in model.variables}
    values["sigma[white,alpha]"] = 1.0
    values["sigma[yellow,alpha]"] = 1.0
    values["sigma[yellow,beta]"] = 1.0
    with pytest.raises(NonIntegralPolicy):
        extract_policy(SolveResult(OPTIMAL, 0.0, Assignment(values)), emap)


def test_observations_without_variables_take_their_first_action(mixing):
    model, emap = build_reachability_milp(preprocess_reachability(mixing, {3}))
    result = solve(model)
    policy = extract_policy(result, emap)
    # the target's observation gets no sigma family
    assert emap.sigma_for(mixing.observation_index("blue")) == {}
    assert policy.action_for(mixing.observation_index("blue")) == 0
    assert policy.is_valid_for(mixing)


def test_default_cost_cap_can_cut_off_the_only_policy(slow_exit):
    goal = slow_exit.mdp.state_index("goal")
    problem = SynthesisProblem(slow_exit, [Specification(SpecKind.UNDISC_REWARD_MIN, targets={goal})])
    # the expected cost is 100, above the first cap
    assert default_cost_bound(slow_exit, 1.0) == pytest.approx(30.0)
    model, emap = stack_specifications(problem)
    assert emap.main.bound == pytest.approx(30.0)
    assert solve(model).status == INFEASIBLE_STATUS

    model, emap = stack_specifications(problem, cost_bound=200.0)
    assert solve(model).objective == pytest.approx(100.0, abs=1e-4)

    model, emap = stack_specifications(problem, cost_bound=math.inf)
    assert not any("cost[" in c.name for c in model.constraints)
    assert "almost_sure" in {c.name for c in model.constraints}
    assert solve(model).has_incumbent
