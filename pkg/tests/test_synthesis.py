import pytest

from polsynth.graph_analysis import preprocess_reachability
from polsynth.milp.branch_and_bound import INFEASIBLE_STATUS, OPTIMAL, SolveResult
from polsynth.milp.encodings import build_reachability_milp
from polsynth.milp.model import Assignment
from polsynth.models.specification import GEQ, LEQ, Specification, SpecKind, SynthesisProblem
from polsynth.synthesis import (
    STOP_EMPTY_GROUP,
    STOP_NO_IMPROVEMENT,
    STOP_NO_INCUMBENT,
    STOP_SINGLE_SOLVE,
    STOP_THRESHOLD_MET,
    SynthesisOptions,
    compute_split_group,
    lexicographic_synthesize,
    run_splitting_heuristic,
    solve_once,
    synthesize,
)
from polsynth.transforms import RandomizationMode, check_bisimulation, split_states


def _incumbent(model, **chosen):
    values = {v.name: 0.0 for v in model.variables}
    values.update(chosen)
    return SolveResult(OPTIMAL, 0.5, Assignment(values))


def test_split_group_holds_states_preferring_another_action(mixing):
    model, emap = build_reachability_milp(preprocess_reachability(mixing, {3}))
    result = _incumbent(model, **{"sigma[white,alpha]": 1.0, "sigma[yellow,alpha]": 1.0})
    # s3 loops under alpha while beta would reach s4; s2 already reaches it
    assert compute_split_group(mixing, result, emap) == {mixing.mdp.state_index("s3")}

    result = _incumbent(model, **{"sigma[white,alpha]": 1.0, "sigma[yellow,beta]": 1.0})
    assert compute_split_group(mixing, result, emap) == {mixing.mdp.state_index("s2")}


def test_solve_once(mixing_problem):
    outcome = solve_once(mixing_problem)
    assert outcome.satisfied
    assert outcome.objective == pytest.approx(0.5, abs=1e-9)
    assert outcome.values == pytest.approx([0.5])
    assert outcome.stop_reason == STOP_SINGLE_SOLVE
    assert len(outcome.trace) == 1
    assert outcome.policy.is_valid_for(outcome.pomdp)
    assert outcome.to_dict()["num_states"] == 4


def test_solve_once_with_light_randomization(mixing_problem):
    outcome = solve_once(mixing_problem, SynthesisOptions(randomization=RandomizationMode.LIGHT))
    assert outcome.best_value == pytest.approx(1.0)
    assert list(outcome.to_dict()["mixtures"]) == ["mix(alpha:1/2,beta:1/2)"]


def test_splitting_gives_the_policy_memory(mixing_problem, mixing):
    outcome = run_splitting_heuristic(mixing_problem)
    assert outcome.best_value == pytest.approx(1.0)
    assert outcome.trace[0].objective == pytest.approx(0.5, abs=1e-9)
    assert outcome.trace[0].split_group
    assert outcome.trace[1].objective == pytest.approx(1.0, abs=1e-9)
    assert outcome.stop_reason in (STOP_EMPTY_GROUP, STOP_NO_IMPROVEMENT)
    assert outcome.pomdp.num_states == 5
    assert outcome.relation.is_surjective_onto(mixing.num_states)
    assert outcome.base.mdp == outcome.pomdp.mdp


def test_heuristic_without_splitting_is_a_single_solve(mixing_problem):
    outcome = run_splitting_heuristic(mixing_problem, SynthesisOptions(split=False))
    assert outcome.best_value == pytest.approx(0.5)
    assert outcome.stop_reason == STOP_SINGLE_SOLVE


def test_heuristic_growth_limit(mixing_problem):
    outcome = run_splitting_heuristic(mixing_problem, SynthesisOptions(growth_factor=1.0))
    assert outcome.best_value == pytest.approx(0.5)
    assert len(outcome.trace) == 1


def test_infeasible_threshold_has_no_incumbent(mixing):
    problem = SynthesisProblem(mixing, [Specification(SpecKind.UNDISC_REWARD_MIN, targets={3})])
    outcome = solve_once(problem)
    assert not outcome.satisfied
    assert not outcome.has_policy
    assert outcome.status == INFEASIBLE_STATUS
    assert outcome.stop_reason == STOP_NO_INCUMBENT


def test_lexicographic_stages(shared_entry):
    end = shared_entry.mdp.state_index("end")
    problem = SynthesisProblem(shared_entry, [
        Specification(SpecKind.DISC_REWARD_THRESHOLD, discount=0.9, op=LEQ, bound=0.5),
        Specification(SpecKind.REACH_MAX, targets={end}),
    ])
    outcome = lexicographic_synthesize(problem)
    assert outcome.satisfied
    assert outcome.values == pytest.approx([0.45, 1.0])
    assert outcome.policy.action_for(shared_entry.observation_index("white")) == shared_entry.mdp.action_index("alpha")
    assert synthesize(problem).values == pytest.approx(outcome.values)


def test_unmet_threshold_is_reported(shared_entry):
    end = shared_entry.mdp.state_index("end")
    problem = SynthesisProblem(shared_entry, [
        Specification(SpecKind.REACH_MAX, targets={end}),
        Specification(SpecKind.DISC_REWARD_THRESHOLD, discount=0.9, op=GEQ, bound=5.0),
    ])
    outcome = synthesize(problem)
    assert not outcome.satisfied
    assert outcome.unsatisfied_spec == 1
    # the best the threshold stage found is still reported
    assert outcome.values[1] == pytest.approx(0.9)


def test_threshold_stage_stops_once_met(mixing):
    problem = SynthesisProblem(mixing, [
        Specification(SpecKind.REACH_THRESHOLD, targets={3}, op=GEQ, bound=0.4),
    ])
    outcome = synthesize(problem)
    assert outcome.satisfied
    assert outcome.stop_reason == STOP_THRESHOLD_MET
    assert len(outcome.trace) == 1


@pytest.mark.slow
def test_split_models_stay_bisimilar_along_the_heuristic(mixing_problem, mixing):
    outcome = run_splitting_heuristic(mixing_problem)
    group = {mixing.mdp.state_index(name) for name in outcome.trace[0].split_group}
    split, relation = split_states(mixing, group)
    assert check_bisimulation(mixing, split, relation)


def test_cost_cap_grows_until_the_policy_fits(slow_exit):
    goal = slow_exit.mdp.state_index("goal")
    outcome = solve_once(SynthesisProblem(slow_exit, [Specification(SpecKind.UNDISC_REWARD_MIN, targets={goal})]))
    assert outcome.satisfied
    assert outcome.objective == pytest.approx(100.0, abs=1e-4)
    assert outcome.values == pytest.approx([100.0], abs=1e-4)


def test_best_value_reads_the_objective_spec(shared_entry):
    end = shared_entry.mdp.state_index("end")
    problem = SynthesisProblem(shared_entry, [
        Specification(SpecKind.REACH_THRESHOLD, targets={end}, op=GEQ, bound=0.5),
        Specification(SpecKind.DISC_REWARD_MAX, discount=0.9),
    ])
    outcome = synthesize(problem)
    assert outcome.satisfied
    assert outcome.best_value == pytest.approx(0.9, abs=1e-6)
