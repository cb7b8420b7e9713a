import pytest

from polsynth.errors import EmptyTarget
from polsynth.graph_analysis import (
    pre_observation_map,
    pre_observations,
    preprocess_reachability,
    problematic_actions,
    problematic_states,
)


def test_problematic_states_lie_on_avoiding_cycles(mixing):
    # s1 can avoid s4 but only passes through; s2 (beta) and s3 (alpha) loop forever
    assert problematic_states(mixing, {3}) == frozenset({1, 2})


def test_problematic_actions_stay_inside(mixing):
    assert problematic_actions(mixing, frozenset({1, 2})) == frozenset({(1, 1), (2, 0)})


def test_preprocess_reachability(mixing):
    ctx = preprocess_reachability(mixing, {3})
    assert ctx.relevant == frozenset(range(4))
    assert ctx.targets == frozenset({3})
    assert ctx.problematic == frozenset({1, 2})
    assert ctx.non_target_states() == [0, 1, 2]
    # targets keep one action, as a self loop
    assert ctx.enabled_actions(3) == (0,)
    assert ctx.transition(3, 0) == {3: 1}


def test_states_that_cannot_reach_targets_are_dropped(shared_entry):
    s1 = shared_entry.mdp.state_index("s1")
    ctx = preprocess_reachability(shared_entry, {s1})
    assert ctx.relevant == frozenset({shared_entry.initial, s1})
    assert not ctx.initial_is_irrelevant


def test_empty_target_set(mixing):
    with pytest.raises(EmptyTarget):
        preprocess_reachability(mixing, set())


def test_pre_observations(mixing):
    white, yellow, blue = 0, 1, 2
    alpha, beta = 0, 1
    pred = pre_observation_map(mixing)
    assert pred[0] == frozenset()
    assert pred[1] == frozenset({(white, alpha), (yellow, beta)})
    assert pred[2] == frozenset({(white, alpha), (yellow, alpha)})
    assert pred[3] == frozenset({(yellow, alpha), (yellow, beta), (blue, alpha)})
    assert all(pre_observations(mixing, s) == pred[s] for s in range(mixing.num_states))
