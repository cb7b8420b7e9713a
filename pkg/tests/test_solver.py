import logging
import math

import numpy as np
import pytest

from polsynth.milp import branch_and_bound
from polsynth.milp.branch_and_bound import (
    INFEASIBLE_STATUS,
    NODE_LIMIT,
    OPTIMAL,
    SolveParams,
    _most_fractional,
    solve,
)
from polsynth.milp.model import EQ, GE, LE, MAXIMIZE, MINIMIZE, MilpModel, check_feasible
from polsynth.milp.simplex import INFEASIBLE, OPTIMAL as LP_OPTIMAL, UNBOUNDED, LpResult, solve_lp


def _lp():
    model = MilpModel("lp")
    x = model.add_variable("x", ub=math.inf)
    y = model.add_variable("y", ub=math.inf)
    return model, x, y


def test_lp_optimum_at_a_vertex():
    model, x, y = _lp()
    model.add_constraint({x: 1, y: 1}, LE, 4)
    model.add_constraint({x: 1, y: 3}, LE, 6)
    model.add_constraint({x: 1}, LE, 3)
    model.set_objective(MAXIMIZE, {x: 3, y: 2})
    result = solve_lp(model)
    assert result.status == LP_OPTIMAL
    assert result.objective == pytest.approx(11.0)
    assert list(result.values) == pytest.approx([3.0, 1.0])


def test_lp_minimization_with_covering_row():
    model, x, y = _lp()
    model.add_constraint({x: 1, y: 1}, GE, 1)
    model.set_objective(MINIMIZE, {x: 1, y: 2})
    result = solve_lp(model)
    assert result.objective == pytest.approx(1.0)
    assert list(result.values) == pytest.approx([1.0, 0.0])


def test_lp_equality_row():
    model = MilpModel()
    x = model.add_variable("x")
    y = model.add_variable("y")
    model.add_constraint({x: 1, y: 1}, EQ, 1)
    model.set_objective(MAXIMIZE, {x: 1, y: -1})
    assert solve_lp(model).objective == pytest.approx(1.0)


def test_lp_infeasible_and_unbounded():
    model = MilpModel()
    x = model.add_variable("x")
    model.add_constraint({x: 1}, GE, 2)
    model.set_objective(MAXIMIZE, {x: 1})
    assert solve_lp(model).status == INFEASIBLE

    model, x, y = _lp()
    model.add_constraint({x: 1, y: -1}, LE, 1)
    model.set_objective(MAXIMIZE, {x: 1})
    assert solve_lp(model).status == UNBOUNDED


def test_lp_respects_tightened_bounds():
    model, x, y = _lp()
    model.add_constraint({x: 1, y: 1}, LE, 4)
    model.set_objective(MAXIMIZE, {x: 1})
    result = solve_lp(model, lower=[0.0, 0.0], upper=[2.5, math.inf])
    assert result.objective == pytest.approx(2.5)


def _knapsack():
    model = MilpModel("knapsack")
    a = model.add_binary("a")
    b = model.add_binary("b")
    c = model.add_binary("c")
    model.add_constraint({a: 2, b: 3, c: 1}, LE, 5, "weight")
    model.set_objective(MAXIMIZE, {a: 5, b: 4, c: 3})
    return model


def test_branch_and_bound_finds_the_optimum():
    model = _knapsack()
    seen = []
    result = solve(model, on_incumbent=lambda objective, assignment: seen.append(objective))
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(9.0)
    assert result.assignment.values == pytest.approx({"a": 1.0, "b": 1.0, "c": 0.0})
    assert check_feasible(model, result.assignment)
    assert seen and seen[-1] == pytest.approx(9.0)
    assert result.gap == pytest.approx(0.0, abs=1e-6)


def test_logged_bounds_never_cut_off_the_optimum():
    result = solve(_knapsack())
    bounds = [value for event, value in result.trace if event == "bound"]
    assert bounds
    assert all(value >= 9.0 - 1e-6 for value in bounds)


def test_minimization():
    model = MilpModel()
    a = model.add_binary("a")
    b = model.add_binary("b")
    x = model.add_variable("x", ub=10.0)
    model.add_constraint({a: 1, b: 1}, GE, 1)
    model.add_constraint({x: 1, a: -4}, GE, 0)
    model.set_objective(MINIMIZE, {a: 3, b: 5, x: 1})
    result = solve(model)
    assert result.objective == pytest.approx(5.0)
    assert result.assignment["b"] == pytest.approx(1.0)


def test_infeasible_model_has_no_incumbent():
    model = _knapsack()
    model.add_constraint({0: 1, 1: 1, 2: 1}, GE, 3)
    result = solve(model)
    assert result.status == INFEASIBLE_STATUS
    assert not result.has_incumbent


def test_node_limit_without_incumbent():
    result = solve(_knapsack(), SolveParams(node_limit=1))
    assert result.status == NODE_LIMIT
    assert result.nodes == 1


def test_repeated_solves_are_identical():
    first = solve(_knapsack(), SolveParams(seed=4))
    second = solve(_knapsack(), SolveParams(seed=4))
    assert first.to_dict() == second.to_dict()
    assert first.assignment == second.assignment


def test_parallel_workers_reach_the_same_optimum():
    assert solve(_knapsack(), SolveParams(workers=3)).objective == pytest.approx(9.0)


@pytest.mark.parametrize("params", [
    SolveParams(mode="bogus"),
    SolveParams(mode="time_limit_after_incumbent"),
    SolveParams(workers=0),
    SolveParams(gap_tolerance=0.0),
])
def test_invalid_parameters(params):
    with pytest.raises(ValueError):
        solve(_knapsack(), params)


def test_equally_fractional_binaries_are_drawn_with_the_seed():
    values = [0.5, 0.5, 0.9, 0.5, 0.5]
    binaries = range(5)
    assert _most_fractional(values, binaries, 1e-6) == 0
    picks = {_most_fractional(values, binaries, 1e-6, np.random.default_rng(seed)) for seed in range(20)}
    assert picks <= {0, 1, 3, 4}
    assert len(picks) > 1
    first = _most_fractional(values, binaries, 1e-6, np.random.default_rng(11))
    assert _most_fractional(values, binaries, 1e-6, np.random.default_rng(11)) == first
    assert _most_fractional([0.0, 1.0], range(2), 1e-6, np.random.default_rng(0)) is None


def test_seeds_change_the_search_but_not_the_optimum():
    model = MilpModel("symmetric")
    picks = [model.add_binary(f"x{i}") for i in range(4)]
    model.add_constraint({x: 2.0 for x in picks}, LE, 3.0, "cap")
    model.set_objective(MAXIMIZE, {x: 1.0 for x in picks})
    for seed in range(5):
        assert solve(model, SolveParams(seed=seed)).objective == pytest.approx(1.0)


def test_failed_polish_keeps_the_node_solution(monkeypatch, caplog):
    model = MilpModel("polish")
    a = model.add_binary("a")
    x = model.add_variable("x", ub=2.0)
    model.add_constraint({a: 1.0, x: 1.0}, LE, 3.0, "cap")
    model.set_objective(MAXIMIZE, {a: 1.0, x: 1.0})
    calls = []

    def flaky_lp(model, lower=None, upper=None):
        calls.append(1)
        if len(calls) == 2:
            return LpResult(INFEASIBLE)
        return solve_lp(model, lower, upper)

    monkeypatch.setattr(branch_and_bound, "solve_lp", flaky_lp)
    caplog.set_level(logging.DEBUG, logger="polsynth.milp.branch_and_bound")
    result = solve(model)
    assert len(calls) == 2
    assert result.status == OPTIMAL
    assert result.objective == pytest.approx(3.0)
    assert result.assignment["a"] == pytest.approx(1.0)
    assert "keeping the node solution" in caplog.text
