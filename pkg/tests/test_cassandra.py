from fractions import Fraction

import pytest

from polsynth.cassandra import determinize_observations, determinize_with_origin, parse_cassandra
from polsynth.errors import ModelSyntaxError, SemanticsError
from polsynth.models.pomdp_input import validate

from .conftest import benchmark_text

TWO_STATES = """\
discount: 0.9
values: {values}
states: 2
actions: a b
observations: o1 o2
start: {start}

T: a
identity
T: b : 0 : 1 1
T: b : 1 : 1 1
O: * : 0 : o1 1
O: * : 1 : o2 1
R: b : 0 : * : * 1
"""


def _two_states(values="reward", start="0"):
    return parse_cassandra(TWO_STATES.format(values=values, start=start))


def test_header_and_entries():
    gp = _two_states()
    assert gp.discount == 0.9
    assert gp.mdp.state_names == ("0", "1")
    assert gp.mdp.action_names == ("a", "b")
    assert gp.observation_names == ("o1", "o2")
    assert gp.mdp.transition(0, 0) == {0: Fraction(1)}
    assert gp.mdp.transition(0, 1) == {1: Fraction(1)}
    assert gp.mdp.reward(0, 1) == pytest.approx(1.0)
    assert gp.mdp.reward(1, 1) == 0.0
    assert gp.observation_distribution(1, 1) == {1: Fraction(1)}


def test_cost_values_flip_the_sign():
    assert _two_states(values="cost").mdp.reward(0, 1) == pytest.approx(-1.0)


def test_determinization_of_deterministic_observations():
    pomdp = determinize_observations(_two_states())
    assert pomdp.num_states == 2
    assert pomdp.state_names == ("0|o1", "1|o2")
    assert pomdp.initial == 0
    assert pomdp.observation_names == ("o1", "o2")
    assert not validate(pomdp)


def test_start_distribution_becomes_dispatch_state():
    gp = _two_states(start="uniform")
    assert gp.mdp.num_states == 3
    assert gp.mdp.state_names[-1] == "start"
    assert gp.mdp.initial == 2
    assert gp.mdp.action_names[-1] == "start"
    assert gp.mdp.transition(2, 2) == {0: Fraction(1, 2), 1: Fraction(1, 2)}

    pomdp, origin = determinize_with_origin(gp)
    assert pomdp.state_names[pomdp.initial] == "start|init"
    assert sorted(pomdp.state_names) == ["0|o1", "1|o2", "start|init"]
    assert origin[pomdp.initial] == 2
    assert not validate(pomdp)


def test_noisy_observations_split_states():
    text = """\
states: s t
actions: go
observations: x y
T: go : s : t 1
T: go : t : t 1
O: go : s : x 1
O: go : t
1/2 1/2
"""
    pomdp, origin = determinize_with_origin(parse_cassandra(text))
    assert pomdp.state_names == ("s|x", "t|x", "t|y")
    assert origin == (0, 1, 1)
    assert pomdp.transition(0, 0) == {1: Fraction(1, 2), 2: Fraction(1, 2)}


def test_unexpected_token_reports_its_line():
    text = "states: 2\nactions: a\nobservations: o\nT: a : 0 : 1 0.5\nfoo\n"
    with pytest.raises(ModelSyntaxError) as excinfo:
        parse_cassandra(text)
    assert excinfo.value.line == 5


def test_unknown_state_name():
    text = "states: s t\nactions: a\nobservations: o\nT: a : s : u 1\n"
    with pytest.raises(ModelSyntaxError, match="unknown state 'u'"):
        parse_cassandra(text)


def test_rows_must_sum_to_one():
    text = "states: 2\nactions: a\nobservations: o\nT: a\n0.5 0.4\n0 1\nO: a\nuniform\n"
    with pytest.raises(SemanticsError, match="sums to 0.9"):
        parse_cassandra(text)


def test_missing_rows_are_rejected():
    text = "states: 2\nactions: a\nobservations: o\nT: a : 0 : 1 1\nO: a\nuniform\n"
    with pytest.raises(SemanticsError, match="unspecified transition row"):
        parse_cassandra(text)


@pytest.mark.parametrize("name", [
    "1d.pomdp", "4x4.95.pomdp", "4x4grid_avoid.pomdp", "cheese.95.pomdp", "cheese_bad.pomdp", "shuttle.95.pomdp",
])
def test_bundled_models_determinize_to_valid_pomdps(name):
    gp = parse_cassandra(benchmark_text(name))
    assert gp.discount == pytest.approx(0.95)
    assert not validate(determinize_observations(gp))
