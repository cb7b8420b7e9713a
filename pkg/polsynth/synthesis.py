"""Policy synthesis pipelines: single solves, the splitting heuristic and lexicographic stages."""
import logging
import math
import time

import numpy as np

from .errors import InvalidOptions, NoIncumbent
from .evaluation import eval_discounted, eval_reachability, eval_total_reward, evaluate_specification, induce_dtmc
from .graph_analysis import pre_observation_map
from .milp.branch_and_bound import INFEASIBLE_STATUS, SolveParams, SolveResult, solve
from .milp.encodings import TOTAL_COST, VMAX_FORMULA, EncodingMap, stack_specifications
from .milp.extraction import extract_policy
from .models.policy import MixtureCatalog, StationaryPolicy
from .models.pomdp import Pomdp
from .models.specification import DISCOUNTED_KINDS, REACH_KINDS, SynthesisProblem
from .transforms import RandomizationMode, SplitRelation, apply_randomization, split_all_observations, split_states

logger = logging.getLogger(__name__)

# values closer than this count as equal when comparing iterations
IMPROVEMENT_TOL = 1e-9

STOP_NO_IMPROVEMENT = "no_improvement"
STOP_EMPTY_GROUP = "empty_split_group"
STOP_ITERATION_LIMIT = "iteration_limit"
STOP_GROWTH_LIMIT = "growth_limit"
STOP_NO_INCUMBENT = "no_incumbent"
STOP_THRESHOLD_MET = "threshold_met"
STOP_SINGLE_SOLVE = "single_solve"

# re-solves with a larger total-cost cap before giving up on it
COST_BOUND_ROUNDS = 12
COST_BOUND_GROWTH = 2.0


class SynthesisOptions:
    def __init__(self, randomization: RandomizationMode = RandomizationMode.PURE, solve_params: SolveParams = None,
                 max_iters: int = 50, growth_factor: float = 10.0, split: bool = True,
                 vmax_mode: str = VMAX_FORMULA):
        self.randomization = randomization
        self.solve_params = solve_params or SolveParams()
        self.max_iters = max_iters
        self.growth_factor = growth_factor
        self.split = split
        self.vmax_mode = vmax_mode

    def validate(self) -> None:
        if self.max_iters < 1:
            raise InvalidOptions("max_iters must be at least 1")
        if self.growth_factor < 1:
            raise InvalidOptions("growth factor must be at least 1")
        self.solve_params.validate()

    def to_dict(self) -> dict:
        return {
            "randomization": self.randomization.value,
            "solver": self.solve_params.to_dict(),
            "max_iters": self.max_iters,
            "growth_factor": self.growth_factor,
            "split": self.split,
            "vmax_mode": self.vmax_mode,
        }


class IterationRecord:
    def __init__(self, index: int, status: str, objective, value, split_group, num_states: int,
                 num_observations: int, seconds: float):
        self.index = index
        self.status = status
        self.objective = objective
        self.value = value
        self.split_group = list(split_group)
        self.num_states = num_states
        self.num_observations = num_observations
        self.seconds = seconds

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "status": self.status,
            "objective": self.objective,
            "value": self.value,
            "split_group": list(self.split_group),
            "num_states": self.num_states,
            "num_observations": self.num_observations,
        }


class _Attempt:
    """One MILP solve on one (split, randomized) model."""

    def __init__(self, pomdp: Pomdp, catalog: MixtureCatalog, stage: SynthesisProblem, result: SolveResult,
                 emap: EncodingMap, policy: StationaryPolicy = None, value: float = None):
        self.pomdp = pomdp
        self.catalog = catalog
        self.stage = stage
        self.result = result
        self.emap = emap
        self.policy = policy
        self.value = value


class SynthesisOutcome:
    def __init__(self, problem: SynthesisProblem, policy: StationaryPolicy = None, values=None,
                 pomdp: Pomdp = None, base: Pomdp = None, catalog: MixtureCatalog = None,
                 relation: SplitRelation = None, trace=None, objective=None, status: str = None,
                 satisfied: bool = True, unsatisfied_spec: int = None, stop_reason: str = None):
        self.problem = problem
        self.policy = policy
        self.values = list(values) if values is not None else None
        self.pomdp = pomdp
        self.base = base
        self.catalog = catalog or MixtureCatalog()
        self.relation = relation
        self.trace = list(trace or [])
        self.objective = objective
        self.status = status
        self.satisfied = satisfied
        self.unsatisfied_spec = unsatisfied_spec
        self.stop_reason = stop_reason

    @property
    def has_policy(self) -> bool:
        return self.policy is not None

    @property
    def best_value(self):
        """Evaluated value of the optimized quantity (the objective spec, else the first spec)."""
        if self.values is None:
            return None
        objective = self.problem.objective
        if objective is None:
            return self.values[0]
        return self.values[self.problem.specs.index(objective)]

    def policy_lines(self) -> list:
        return self.policy.to_lines(self.pomdp) if self.policy is not None else []

    def to_dict(self) -> dict:
        pomdp = self.pomdp
        return {
            "satisfied": self.satisfied,
            "unsatisfied_spec": self.unsatisfied_spec,
            "status": self.status,
            "stop_reason": self.stop_reason,
            "objective": self.objective,
            "values": self.values,
            "specs": [spec.describe() for spec in self.problem.specs],
            "policy": self.policy.to_dict(pomdp) if self.policy is not None else None,
            "mixtures": self.catalog.to_dict(pomdp) if pomdp is not None else {},
            "num_states": pomdp.num_states if pomdp is not None else None,
            "trace": [record.to_dict() for record in self.trace],
        }

    def __repr__(self) -> str:
        return f"SynthesisOutcome(satisfied={self.satisfied}, values={self.values}, iterations={len(self.trace)})"


def _improves(value: float, reference: float, maximize: bool) -> bool:
    if reference is None:
        return True
    if maximize:
        return value > reference + IMPROVEMENT_TOL
    return value < reference - IMPROVEMENT_TOL


def _largest_cost(pomdp: Pomdp, policy: StationaryPolicy, blocks) -> float:
    """Largest finite expected total cost of any state under policy, over the given cost blocks."""
    dtmc = induce_dtmc(pomdp, policy)
    largest = 0.0
    for block in blocks:
        values = eval_total_reward(dtmc, block.spec.targets)
        finite = values[np.isfinite(values)]
        if finite.size:
            largest = max(largest, float(finite.max()))
    return largest


def _raised_cost_bound(stage: SynthesisProblem, emap: EncodingMap, result: SolveResult, opts: SynthesisOptions,
                       optimize: int = None):
    """A larger cap for the total-cost blocks when the current one may exclude policies, else None.

    With an incumbent the cap is raised while the incumbent's own costs come within a factor
    COST_BOUND_GROWTH of it. Without one the model is solved again with uncapped costs:
    if that is infeasible too, so is the problem; otherwise the cap grows past the costs of
    the policy found.
    """
    blocks = [block for block in emap.blocks if block.form == TOTAL_COST]
    if not blocks:
        return None
    bound = min(block.bound for block in blocks)
    if result.has_incumbent:
        needed = _largest_cost(emap.pomdp, extract_policy(result, emap), blocks)
        if needed * COST_BOUND_GROWTH <= bound:
            return None
    else:
        if result.status != INFEASIBLE_STATUS:
            return None
        model, relaxed_map = stack_specifications(stage, optimize=optimize, vmax_mode=opts.vmax_mode,
                                                  cost_bound=math.inf)
        relaxed = solve(model, opts.solve_params)
        if not relaxed.has_incumbent:
            return None
        needed = _largest_cost(emap.pomdp, extract_policy(relaxed, relaxed_map), blocks)
    raised = max(bound, needed) * COST_BOUND_GROWTH
    return raised if raised > bound else None


def _solve_stage(problem: SynthesisProblem, base: Pomdp, relation: SplitRelation, opts: SynthesisOptions,
                 optimize: int = None) -> _Attempt:
    randomized, catalog = apply_randomization(base, opts.randomization)
    stage = problem.with_pomdp(randomized, relation)
    cost_bound = None
    for _ in range(COST_BOUND_ROUNDS):
        model, emap = stack_specifications(stage, optimize=optimize, vmax_mode=opts.vmax_mode, cost_bound=cost_bound)
        result = solve(model, opts.solve_params)
        raised = _raised_cost_bound(stage, emap, result, opts, optimize)
        if raised is None:
            break
        logger.info("raising the total-cost cap to %g", raised)
        cost_bound = raised
    else:
        logger.warning("total-cost cap still binding after %d rounds", COST_BOUND_ROUNDS)
    attempt = _Attempt(randomized, catalog, stage, result, emap)
    if result.has_incumbent:
        attempt.policy = extract_policy(result, emap)
        attempt.value = evaluate_specification(randomized, emap.main.spec, attempt.policy)
    return attempt


def _state_values(pomdp: Pomdp, policy: StationaryPolicy, spec) -> np.ndarray:
    dtmc = induce_dtmc(pomdp, policy)
    if spec.kind in REACH_KINDS:
        return eval_reachability(dtmc, spec.targets)
    if spec.kind in DISCOUNTED_KINDS:
        return eval_discounted(dtmc, spec.discount)
    return eval_total_reward(dtmc, spec.targets)


def compute_split_group(pomdp: Pomdp, result: SolveResult, emap: EncodingMap) -> set:
    """States whose locally best action differs from the one the incumbent picks.

    pomdp is the model that will be split (same states as emap.pomdp, possibly without
    mixture actions); candidate actions are those of emap.pomdp. Reachability compares
    successor values, reward objectives add the one-step reward (discounted by beta).
    Ties keep the current action, then the lowest action index. The initial state and
    states with at most one pre-observation cannot be split and are left out.
    """
    if not result.has_incumbent:
        raise NoIncumbent(f"solver finished with status {result.status} and no incumbent")
    model = emap.pomdp
    spec = emap.main.spec
    policy = extract_policy(result, emap)
    values = _state_values(model, policy, spec)
    maximize = spec.maximizes
    pred = pre_observation_map(pomdp)
    targets = spec.targets or frozenset()

    def score(s: int, a: int) -> float:
        ahead = sum(float(p) * values[t] for t, p in model.transition(s, a).items())
        if spec.kind in REACH_KINDS:
            return ahead
        if spec.kind in DISCOUNTED_KINDS:
            return float(model.reward(s, a)) + spec.discount * ahead
        return float(model.reward(s, a)) + ahead

    group = set()
    for s in range(model.num_states):
        if s == model.initial or s in targets or len(pred[s]) <= 1:
            continue
        current = policy.action_for(model.observation(s))
        best, best_score = current, score(s, current)
        for a in model.enabled_actions(s):
            candidate = score(s, a)
            if math.isnan(candidate):
                continue
            if (candidate > best_score + IMPROVEMENT_TOL) if maximize else (candidate < best_score - IMPROVEMENT_TOL):
                best, best_score = a, candidate
        if best != current:
            group.add(s)
    logger.debug("split group: %s", sorted(model.state_names[s] for s in group))
    return group


def _outcome(problem: SynthesisProblem, attempt: _Attempt, base: Pomdp, relation: SplitRelation, trace,
             stop_reason: str) -> SynthesisOutcome:
    if attempt is None or attempt.policy is None:
        status = trace[-1].status if trace else None
        return SynthesisOutcome(problem, trace=trace, status=status, satisfied=False, stop_reason=stop_reason)
    full = problem.with_pomdp(attempt.pomdp, relation)
    values = [evaluate_specification(attempt.pomdp, spec, attempt.policy) for spec in full.specs]
    return SynthesisOutcome(
        problem,
        policy=attempt.policy,
        values=values,
        pomdp=attempt.pomdp,
        base=base,
        catalog=attempt.catalog,
        relation=relation,
        trace=trace,
        objective=attempt.result.objective,
        status=attempt.result.status,
        satisfied=all(spec.is_met_by(v) for spec, v in zip(problem.specs, values)),
        stop_reason=stop_reason,
    )


def solve_once(problem: SynthesisProblem, opts: SynthesisOptions = None) -> SynthesisOutcome:
    """One MILP over the given POMDP, without any splitting."""
    opts = opts or SynthesisOptions()
    opts.validate()
    problem.validate()
    started = time.monotonic()
    relation = SplitRelation.identity(problem.pomdp.num_states)
    attempt = _solve_stage(problem, problem.pomdp, relation, opts)
    trace = [IterationRecord(0, attempt.result.status, attempt.result.objective, attempt.value, [],
                             attempt.pomdp.num_states, attempt.pomdp.num_observations, time.monotonic() - started)]
    reason = STOP_SINGLE_SOLVE if attempt.policy is not None else STOP_NO_INCUMBENT
    return _outcome(problem, attempt, problem.pomdp, relation, trace, reason)


def run_splitting_heuristic(problem: SynthesisProblem, opts: SynthesisOptions = None, optimize: int = None,
                            goal=None) -> SynthesisOutcome:
    """Observation splitting, then repeated state splitting while the MILP optimum improves.

    The best iteration (by evaluated value) is returned, not merely the last one. With
    `goal`, a threshold spec, the loop also stops as soon as goal is met.
    """
    opts = opts or SynthesisOptions()
    opts.validate()
    problem.validate()
    source = problem.pomdp
    base = split_all_observations(source)
    relation = SplitRelation.identity(source.num_states)
    max_states = opts.growth_factor * source.num_states

    best, best_base, best_relation = None, base, relation
    previous = None
    trace = []
    stop_reason = STOP_ITERATION_LIMIT
    for index in range(opts.max_iters):
        started = time.monotonic()
        attempt = _solve_stage(problem, base, relation, opts, optimize)
        record = IterationRecord(index, attempt.result.status, attempt.result.objective, attempt.value, [],
                                 base.num_states, base.num_observations, 0.0)
        trace.append(record)
        if attempt.policy is None:
            record.seconds = time.monotonic() - started
            stop_reason = STOP_NO_INCUMBENT
            break

        maximize = attempt.emap.main.spec.maximizes
        if best is None or _improves(attempt.value, best.value, maximize):
            best, best_base, best_relation = attempt, base, relation
        logger.info("iteration %d: objective %.9g, value %.9g, %d states",
                    index, attempt.result.objective, attempt.value, base.num_states)

        if goal is not None and goal.is_met_by(attempt.value):
            record.seconds = time.monotonic() - started
            stop_reason = STOP_THRESHOLD_MET
            break
        if previous is not None and not _improves(attempt.result.objective, previous, maximize):
            record.seconds = time.monotonic() - started
            stop_reason = STOP_NO_IMPROVEMENT
            break
        previous = attempt.result.objective
        if not opts.split:
            record.seconds = time.monotonic() - started
            stop_reason = STOP_SINGLE_SOLVE
            break

        group = compute_split_group(base, attempt.result, attempt.emap)
        record.split_group = sorted(base.state_names[s] for s in group)
        record.seconds = time.monotonic() - started
        if not group:
            stop_reason = STOP_EMPTY_GROUP
            break
        pred = pre_observation_map(base)
        growth = sum(len(pred[s]) - 1 for s in group)
        if base.num_states + growth > max_states:
            logger.info("splitting %d states would exceed %g states", len(group), max_states)
            stop_reason = STOP_GROWTH_LIMIT
            break
        base, step = split_states(base, group)
        base = split_all_observations(base)
        relation = relation.then(step)

    logger.info("heuristic stopped (%s) after %d iteration(s)", stop_reason, len(trace))
    return _outcome(problem, best, best_base, best_relation, trace, stop_reason)


def lexicographic_synthesize(problem: SynthesisProblem, opts: SynthesisOptions = None) -> SynthesisOutcome:
    """Meets the thresholds one after another, then optimizes the objective under all of them.

    Each stage runs the splitting heuristic on that threshold's quantity while every
    threshold met so far is a hard constraint. A threshold that cannot be met ends the
    run with an outcome flagged unsatisfied.
    """
    opts = opts or SynthesisOptions()
    problem.validate()
    specs = problem.specs
    logger.info("lexicographic synthesis: %d threshold(s), objective %s", len(problem.thresholds),
                problem.objective.describe() if problem.objective is not None else "none")
    met = []
    outcome = None
    for k, spec in enumerate(specs):
        if not spec.is_threshold:
            continue
        stage = SynthesisProblem(problem.pomdp, [specs[j] for j in met] + [spec], problem.options)
        outcome = run_splitting_heuristic(stage, opts, optimize=len(met), goal=spec)
        value = outcome.values[-1] if outcome.values is not None else None
        if value is None or not spec.is_met_by(value):
            logger.info("threshold %d (%s) not met: best %s", k, spec.describe(), value)
            return _restated(problem, outcome, satisfied=False, unsatisfied_spec=k)
        met.append(k)

    if problem.objective is not None:
        stage = SynthesisProblem(problem.pomdp, [specs[j] for j in met] + [problem.objective], problem.options)
        outcome = run_splitting_heuristic(stage, opts)
    return _restated(problem, outcome, satisfied=outcome.has_policy, unsatisfied_spec=None)


def _restated(problem: SynthesisProblem, outcome: SynthesisOutcome, satisfied: bool,
              unsatisfied_spec) -> SynthesisOutcome:
    """The outcome of a stage, with values re-evaluated for every spec of the full problem."""
    values = None
    if outcome.has_policy:
        full = problem.with_pomdp(outcome.pomdp, outcome.relation)
        values = [evaluate_specification(outcome.pomdp, spec, outcome.policy) for spec in full.specs]
        if unsatisfied_spec is None:
            satisfied = satisfied and all(spec.is_met_by(v) for spec, v in zip(problem.specs, values))
    return SynthesisOutcome(
        problem,
        policy=outcome.policy,
        values=values,
        pomdp=outcome.pomdp,
        base=outcome.base,
        catalog=outcome.catalog,
        relation=outcome.relation,
        trace=outcome.trace,
        objective=outcome.objective,
        status=outcome.status,
        satisfied=satisfied,
        unsatisfied_spec=unsatisfied_spec,
        stop_reason=outcome.stop_reason,
    )


def synthesize(problem: SynthesisProblem, opts: SynthesisOptions = None) -> SynthesisOutcome:
    """The splitting heuristic for a lone objective, lexicographic stages otherwise."""
    problem.validate()
    if not problem.is_multi_objective and problem.objective is not None:
        return run_splitting_heuristic(problem, opts)
    return lexicographic_synthesize(problem, opts)
