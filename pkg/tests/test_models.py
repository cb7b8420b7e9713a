from fractions import Fraction

import pytest

from polsynth.errors import ConflictingSpecs, InvalidPolicy, InvalidSpecification
from polsynth.models.mdp import Mdp, format_probability, parse_probability
from polsynth.models.policy import StationaryPolicy
from polsynth.models.pomdp import Pomdp, normalize_initial
from polsynth.models.pomdp_input import validate
from polsynth.models.run_record import RunRecord, input_digest
from polsynth.models.specification import GEQ, LEQ, Specification, SpecKind, SynthesisProblem


def _two_state_loop():
    # s0 and s1 share an observation and swap into each other
    mdp = Mdp(["s0", "s1"], 0, ["go"], {(0, 0): {1: Fraction(1)}, (1, 0): {0: Fraction(1)}},
              {(0, 0): 2.0, (1, 0): 0.0})
    return Pomdp(mdp, ["z"], [0, 0])


def test_parse_probability_keeps_short_decimals_exact():
    assert parse_probability("1/3") == Fraction(1, 3)
    assert parse_probability("0.25") == Fraction(1, 4)
    assert isinstance(parse_probability("1e-3"), float)


def test_format_probability():
    assert format_probability(Fraction(1, 2)) == "1/2"
    assert format_probability(Fraction(1)) == "1"
    assert format_probability(0.125) == "0.125"


def test_mdp_enabled_actions_and_rewards(shared_entry):
    mdp = shared_entry.mdp
    assert mdp.enabled_actions(mdp.state_index("s")) == (0, 1)
    assert mdp.enabled_actions(mdp.state_index("s1")) == (0,)
    assert mdp.reward_range() == (0.0, 2.0)
    assert mdp.probability(0, 1, mdp.state_index("s3")) == Fraction(1, 2)


def test_mdp_dict_round_trip(shared_entry):
    assert Pomdp.from_dict(shared_entry.to_dict()) == shared_entry


def test_bundled_toy_models_are_valid(mixing, shared_entry):
    assert not validate(mixing)
    assert not validate(shared_entry)


def test_validate_collects_every_problem():
    mdp = Mdp(
        ["a", "b", "c"], 0, ["x", "y"],
        {(0, 0): {1: Fraction(9, 10)}, (1, 0): {1: Fraction(1)}, (1, 1): {1: Fraction(1)}, (2, 0): {2: Fraction(1)}},
        {(0, 0): 0.0, (1, 0): 0.0, (1, 1): 0.0, (2, 0): 0.0},
    )
    report = validate(Pomdp(mdp, ["o"], [0, 0, 0]))
    messages = " | ".join(report.errors)
    assert "distribution sum 0.9" in messages
    assert "enable different actions" in messages
    assert "state c is unreachable" in messages
    assert report.to_dict()["valid"] is False


def test_normalize_initial_leaves_conforming_models_alone(mixing):
    assert normalize_initial(mixing) is mixing


def test_normalize_initial_adds_fresh_initial_state():
    pomdp = _two_state_loop()
    normalized = normalize_initial(pomdp)
    assert normalized.num_states == 3
    assert normalized.initial == 2
    assert normalized.observation_names[-1] == "init"
    assert normalized.transition(2, 0) == pomdp.transition(0, 0)
    assert normalized.reward(2, 0) == 2.0
    assert not validate(normalized)


def test_specification_validation():
    assert not Specification(SpecKind.REACH_MAX).validate()
    assert not Specification(SpecKind.DISC_REWARD_MAX).validate()
    assert not Specification(SpecKind.DISC_REWARD_MAX, discount=1.0).validate()
    assert not Specification(SpecKind.REACH_THRESHOLD, targets={1}).validate()
    assert Specification(SpecKind.REACH_THRESHOLD, targets={1}, op=GEQ, bound=0.5).validate()


def test_threshold_direction_and_satisfaction():
    at_least = Specification(SpecKind.REACH_THRESHOLD, targets={1}, op=GEQ, bound=0.25)
    at_most = Specification(SpecKind.REACH_THRESHOLD, targets={1}, op=LEQ, bound=0.25)
    assert at_least.maximizes and not at_most.maximizes
    assert at_least.is_met_by(0.25) and not at_least.is_met_by(0.2)
    assert at_most.is_met_by(0.2) and not at_most.is_met_by(0.3)
    assert not Specification(SpecKind.UNDISC_REWARD_MIN, targets={1}).maximizes


def test_problem_rejects_two_objectives(mixing):
    problem = SynthesisProblem(mixing, [
        Specification(SpecKind.REACH_MAX, targets={3}),
        Specification(SpecKind.DISC_REWARD_MAX, discount=0.9),
    ])
    with pytest.raises(ConflictingSpecs):
        problem.validate()


def test_problem_splits_objective_from_thresholds(mixing):
    bound = Specification(SpecKind.REACH_THRESHOLD, targets={3}, op=GEQ, bound=0.4)
    reward = Specification(SpecKind.DISC_REWARD_MAX, discount=0.9)
    problem = SynthesisProblem(mixing, [bound, reward])
    assert problem.objective is reward
    assert problem.thresholds == (bound,)
    assert problem.is_multi_objective

    alone = SynthesisProblem(mixing, [bound])
    assert alone.objective is None
    assert not alone.is_multi_objective


def test_problem_rejects_out_of_range_targets(mixing):
    with pytest.raises(InvalidSpecification):
        SynthesisProblem(mixing, [Specification(SpecKind.REACH_MAX, targets={7})]).validate()


def test_with_pomdp_pulls_targets_back_through_relation(mixing):
    problem = SynthesisProblem(mixing, [Specification(SpecKind.REACH_MAX, targets={3})])
    refined = problem.with_pomdp(mixing, [0, 1, 2, 3, 3])
    assert refined.specs[0].targets == frozenset({3, 4})


def test_policy_text_round_trip(mixing):
    policy = StationaryPolicy.from_text("obs white -> alpha\nobs yellow -> beta\n# done\nobs blue -> alpha\n", mixing)
    assert policy.choice == {0: 0, 1: 1, 2: 0}
    assert policy.to_lines(mixing) == ["obs white -> alpha", "obs yellow -> beta", "obs blue -> alpha"]


def test_policy_text_errors(mixing):
    with pytest.raises(InvalidPolicy):
        StationaryPolicy.from_text("obs white -> gamma\n", mixing)
    with pytest.raises(InvalidPolicy, match="no action chosen"):
        StationaryPolicy.from_text("obs white -> alpha\n", mixing)
    # beta is not enabled in the white state
    with pytest.raises(InvalidPolicy, match="not enabled"):
        StationaryPolicy.from_text("obs white -> beta\nobs yellow -> alpha\nobs blue -> alpha\n", mixing)


def test_run_records_ignore_timings():
    digest = input_digest("model text", "policy text")
    first = RunRecord("solve", digest, {"randomization": "pure"}, {"values": [0.5]}, timings={"total": 0.1})
    second = RunRecord("solve", digest, {"randomization": "pure"}, {"values": [0.5]}, timings={"total": 9.0})
    assert first == second
    assert RunRecord.from_dict(first.to_dict()) == first
    assert "timings" not in first.to_dict(include_timings=False)
    assert digest == input_digest("model text", "policy text")
    assert digest != input_digest("model textpolicy text")
