from fractions import Fraction

import pytest

from polsynth.errors import InitialStateSplit, InvalidPartition, NotSplittable
from polsynth.graph_analysis import pre_observations
from polsynth.transforms import (
    RandomizationMode,
    SplitRelation,
    apply_randomization,
    check_bisimulation,
    split_all_observations,
    split_observation,
    split_state,
    split_states,
    splittable_partition,
)


def test_pure_randomization_changes_nothing(mixing):
    randomized, catalog = apply_randomization(mixing, RandomizationMode.PURE)
    assert randomized is mixing
    assert len(catalog) == 0


@pytest.mark.parametrize("mode", [RandomizationMode.LIGHT, RandomizationMode.HEAVY])
def test_mixture_on_shared_observation(mixing, mode):
    randomized, catalog = apply_randomization(mixing, mode)
    yellow = mixing.observation_index("yellow")
    # two actions give a single subset, so both modes agree
    assert randomized.num_actions == 3
    assert catalog.by_observation == {yellow: (2,)}
    assert randomized.action_names[2] == "mix(alpha:1/2,beta:1/2)"
    assert catalog.distribution(2) == {0: Fraction(1, 2), 1: Fraction(1, 2)}
    s2 = mixing.mdp.state_index("s2")
    assert randomized.transition(s2, 2) == {3: Fraction(1, 2), s2: Fraction(1, 2)}
    # single-state observations keep their actions
    assert randomized.enabled_actions(mixing.initial) == (0,)


def test_heavy_adds_every_subset():
    from polsynth.problem_file import parse_explicit_model

    pomdp = parse_explicit_model(
        "observation o\naction a\naction b\naction c\n"
        "state x obs=o\nstate y obs=o\ninit x\n"
        + "".join(f"trans {s} {a} y 1\n" for s in "xy" for a in "abc")
    )
    light, light_catalog = apply_randomization(pomdp, RandomizationMode.LIGHT)
    heavy, heavy_catalog = apply_randomization(pomdp, RandomizationMode.HEAVY)
    assert len(light_catalog) == 1
    assert len(heavy_catalog) == 4
    assert heavy.num_actions == 7


def test_no_split_when_pre_observations_overlap(mixing, shared_entry):
    assert splittable_partition(mixing, mixing.observation_index("yellow")) is None
    assert splittable_partition(shared_entry, shared_entry.observation_index("yellow")) is None
    assert split_all_observations(shared_entry) == shared_entry


def test_split_state_and_then_observation(shared_entry):
    s2 = shared_entry.mdp.state_index("s2")
    split, relation = split_state(shared_entry, s2)
    assert split.num_states == shared_entry.num_states + 1
    assert split.state_names[s2] == "s2[white/alpha]"
    assert split.state_names[5] == "s2[white/beta]"
    assert relation == SplitRelation([0, 1, 2, 3, 4, 2])
    s = split.initial
    assert split.transition(s, split.mdp.action_index("beta")) == {5: Fraction(1, 2), 3: Fraction(1, 2)}
    assert pre_observations(split, 5) == frozenset({(0, 1)})
    assert check_bisimulation(shared_entry, split, relation)

    yellow = split.observation_index("yellow")
    assert splittable_partition(split, yellow) == [(1, 2), (3, 5)]
    refined = split_all_observations(split)
    assert refined.num_observations == shared_entry.num_observations + 1
    assert refined.observation_names[refined.observation(1)] == "yellow#1"
    assert refined.observation_names[refined.observation(5)] == "yellow#2"
    assert refined.observation(2) == refined.observation(1)
    assert refined.mdp == split.mdp


def test_split_errors(mixing, shared_entry):
    with pytest.raises(InitialStateSplit):
        split_state(shared_entry, shared_entry.initial)
    with pytest.raises(NotSplittable):
        split_state(shared_entry, shared_entry.mdp.state_index("s1"))
    yellow = shared_entry.observation_index("yellow")
    with pytest.raises(InvalidPartition, match="share"):
        split_observation(shared_entry, yellow, [(1,), (2, 3)])
    with pytest.raises(InvalidPartition, match="cover"):
        split_observation(shared_entry, yellow, [(1,), (3,)])
    with pytest.raises(InvalidPartition, match="overlap"):
        split_observation(shared_entry, yellow, [(1, 2), (2, 3)])


def test_wrong_relation_is_not_a_bisimulation(shared_entry):
    split, relation = split_state(shared_entry, shared_entry.mdp.state_index("s2"))
    # the new copy pays nothing, unlike s3
    assert not check_bisimulation(shared_entry, split, SplitRelation([0, 1, 2, 3, 4, 3]))
    assert not check_bisimulation(shared_entry, split, SplitRelation.identity(shared_entry.num_states))


def test_split_states_composes_relations(mixing):
    s3 = mixing.mdp.state_index("s3")
    split, relation = split_states(mixing, {s3})
    assert split.num_states == 5
    assert relation[4] == s3
    assert relation.is_surjective_onto(mixing.num_states)
    assert check_bisimulation(mixing, split, relation)
    # the copy entered from yellow states is now told apart
    refined = split_all_observations(split)
    assert refined.num_observations == 4


@pytest.mark.slow
def test_splits_preserve_bisimilarity_on_random_models(small_corpus):
    for _, pomdp, _ in small_corpus:
        assert check_bisimulation(pomdp, pomdp, SplitRelation.identity(pomdp.num_states))
        candidates = [s for s in range(pomdp.num_states)
                      if s != pomdp.initial and len(pre_observations(pomdp, s)) > 1]
        if not candidates:
            continue
        split, relation = split_states(pomdp, candidates[:2])
        growth = sum(len(pre_observations(pomdp, s)) - 1 for s in candidates[:2])
        assert split.num_states == pomdp.num_states + growth
        assert check_bisimulation(pomdp, split, relation)
