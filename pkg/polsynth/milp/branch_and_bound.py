"""Branch and bound over the binary variables of a MilpModel.

Nodes differ from the root only in variable bounds. Until the first incumbent the
search plunges depth-first (up-branch first); afterwards the open node with the best
LP bound is expanded next. Among equally fractional binaries the branching variable
is drawn with the solve seed.
"""
import heapq
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import InvalidOptions
from .model import MINIMIZE, Assignment, MilpModel
from .simplex import INFEASIBLE, UNBOUNDED, solve_lp

logger = logging.getLogger(__name__)

TO_OPTIMALITY = "to_optimality"
TIME_LIMIT = "time_limit_after_incumbent"

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE_STATUS = "infeasible"
UNBOUNDED_STATUS = "unbounded"
NODE_LIMIT = "node_limit"


class SolveParams:
    def __init__(self, mode: str = TO_OPTIMALITY, time_limit: float = None, gap_tolerance: float = 1e-6,
                 integrality_tolerance: float = 1e-6, seed: int = 0, node_limit: int = None, workers: int = 1):
        self.mode = mode
        self.time_limit = time_limit
        self.gap_tolerance = gap_tolerance
        self.integrality_tolerance = integrality_tolerance
        self.seed = seed
        self.node_limit = node_limit
        self.workers = workers

    def validate(self) -> None:
        if self.mode not in (TO_OPTIMALITY, TIME_LIMIT):
            raise InvalidOptions(f"unknown solve mode {self.mode}")
        if self.mode == TIME_LIMIT and not (self.time_limit and self.time_limit > 0):
            raise InvalidOptions("time-limit mode needs a positive number of seconds")
        if self.gap_tolerance <= 0 or self.integrality_tolerance <= 0:
            raise InvalidOptions("tolerances must be positive")
        if self.workers < 1:
            raise InvalidOptions("worker count must be at least 1")
        if self.node_limit is not None and self.node_limit < 1:
            raise InvalidOptions("node limit must be positive")

    @staticmethod
    def time_limited(seconds: float, **kwargs) -> "SolveParams":
        return SolveParams(mode=TIME_LIMIT, time_limit=seconds, **kwargs)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "time_limit": self.time_limit,
            "gap_tolerance": self.gap_tolerance,
            "integrality_tolerance": self.integrality_tolerance,
            "seed": self.seed,
            "node_limit": self.node_limit,
            "workers": self.workers,
        }


class SolveResult:
    def __init__(self, status: str, objective: float = None, assignment: Assignment = None,
                 bound: float = None, nodes: int = 0, lp_iterations: int = 0, wall_time: float = 0.0,
                 trace=None):
        self.status = status
        self.objective = objective
        self.assignment = assignment
        self.bound = bound
        self.nodes = nodes
        self.lp_iterations = lp_iterations
        self.wall_time = wall_time
        # (event, value) pairs: "bound" for the global dual bound, "incumbent" for new incumbents
        self.trace = list(trace or [])

    @property
    def has_incumbent(self) -> bool:
        return self.assignment is not None

    @property
    def gap(self):
        if self.objective is None or self.bound is None:
            return None
        return abs(self.bound - self.objective)

    def to_dict(self) -> dict:
        """JSON-friendly summary; wall time is kept out so equal runs compare equal."""
        return {
            "status": self.status,
            "objective": self.objective,
            "bound": self.bound,
            "gap": self.gap,
            "nodes": self.nodes,
            "lp_iterations": self.lp_iterations,
        }

    def __repr__(self) -> str:
        return f"SolveResult({self.status}, objective={self.objective}, nodes={self.nodes})"


class _Node:
    __slots__ = ("bound", "ident", "lower", "upper", "depth")

    def __init__(self, bound, ident, lower, upper, depth):
        self.bound = bound
        self.ident = ident
        self.lower = lower
        self.upper = upper
        self.depth = depth

    def __lt__(self, other) -> bool:
        # heapq is a min-heap; larger bounds come first, then older nodes
        return (-self.bound, self.ident) < (-other.bound, other.ident)


def _most_fractional(values, binaries, tol, rng=None):
    """Binary whose LP value is closest to 1/2; ties are drawn with rng, else the lowest index."""
    tied, best_distance = [], None
    for index in binaries:
        frac = values[index] - math.floor(values[index])
        if min(frac, 1.0 - frac) <= tol:
            continue
        distance = abs(frac - 0.5)
        if best_distance is None or distance < best_distance - 1e-12:
            tied, best_distance = [index], distance
        elif distance <= best_distance + 1e-12:
            tied.append(index)
    if not tied:
        return None
    if rng is None or len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


def solve(model: MilpModel, params: SolveParams = None, on_incumbent=None) -> SolveResult:
    """Solves model by LP-based branch and bound.

    on_incumbent, if given, is called with (objective, Assignment) whenever the
    incumbent improves. With one worker, repeated runs are identical.
    """
    params = params or SolveParams()
    params.validate()
    started = time.monotonic()
    sign = -1.0 if model.sense == MINIMIZE else 1.0
    binaries = model.binary_indices()
    lower, upper = model.bounds()
    tol = params.gap_tolerance
    rng = np.random.default_rng(params.seed)

    open_nodes = [_Node(math.inf, 0, lower, upper, 0)]
    plunging = True
    next_ident = 1
    incumbent_score = -math.inf
    incumbent_values = None
    first_incumbent_at = None
    nodes = 0
    lp_iterations = 0
    trace = []
    stopped = False

    def open_bound():
        if not open_nodes:
            return -math.inf
        return open_nodes[0].bound if not plunging else max(node.bound for node in open_nodes)

    def take():
        if plunging:
            return open_nodes.pop()
        return heapq.heappop(open_nodes)

    executor = ThreadPoolExecutor(max_workers=params.workers) if params.workers > 1 else None
    try:
        while open_nodes:
            if first_incumbent_at is not None and params.mode == TIME_LIMIT:
                if time.monotonic() - first_incumbent_at >= params.time_limit:
                    stopped = True
                    break
            if params.node_limit is not None and nodes >= params.node_limit:
                stopped = True
                break

            batch = []
            width = 1 if plunging or executor is None else params.workers
            while open_nodes and len(batch) < width:
                node = take()
                if node.bound <= incumbent_score + tol:
                    continue
                batch.append(node)
            if not batch:
                continue

            if executor is None:
                results = [solve_lp(model, node.lower, node.upper) for node in batch]
            else:
                results = list(executor.map(lambda nd: solve_lp(model, nd.lower, nd.upper), batch))

            for position, (node, lp) in enumerate(zip(batch, results)):
                nodes += 1
                pending = max((other.bound for other in batch[position + 1:]), default=-math.inf)
                lp_iterations += lp.iterations
                if lp.status == UNBOUNDED:
                    logger.warning("LP relaxation is unbounded")
                    return SolveResult(UNBOUNDED_STATUS, nodes=nodes, lp_iterations=lp_iterations,
                                       wall_time=time.monotonic() - started, trace=trace)
                if lp.status == INFEASIBLE:
                    trace.append(("bound", sign * max(incumbent_score, open_bound(), pending)))
                    continue

                score = sign * lp.objective
                trace.append(("bound", sign * max(incumbent_score, open_bound(), pending, score)))
                if score <= incumbent_score + tol:
                    continue

                branch = _most_fractional(lp.values, binaries, params.integrality_tolerance, rng)
                if branch is None:
                    # polish: fix the binaries at their rounded values and re-solve
                    fixed_lower, fixed_upper = node.lower.copy(), node.upper.copy()
                    for index in binaries:
                        fixed_lower[index] = fixed_upper[index] = round(lp.values[index])
                    polished = solve_lp(model, fixed_lower, fixed_upper)
                    lp_iterations += polished.iterations
                    if polished.is_optimal:
                        candidate = polished
                    else:
                        logger.debug("polish LP at node %d ended %s; keeping the node solution", nodes, polished.status)
                        candidate = lp
                    polished_score = sign * candidate.objective
                    if polished_score <= incumbent_score:
                        continue
                    incumbent_score = polished_score
                    incumbent_values = candidate.values.copy()
                    for index in binaries:
                        incumbent_values[index] = round(incumbent_values[index])
                    trace.append(("incumbent", sign * incumbent_score))
                    logger.info("incumbent %.9g after %d nodes", sign * incumbent_score, nodes)
                    if on_incumbent is not None:
                        on_incumbent(sign * incumbent_score, Assignment.from_vector(model, incumbent_values))
                    if first_incumbent_at is None:
                        first_incumbent_at = time.monotonic()
                    if plunging:
                        plunging = False
                        heapq.heapify(open_nodes)
                    continue

                down_upper = node.upper.copy()
                down_upper[branch] = 0.0
                up_lower = node.lower.copy()
                up_lower[branch] = 1.0
                down = _Node(score, next_ident, node.lower, down_upper, node.depth + 1)
                up = _Node(score, next_ident + 1, up_lower, node.upper, node.depth + 1)
                next_ident += 2
                if plunging:
                    open_nodes.append(down)
                    open_nodes.append(up)
                else:
                    heapq.heappush(open_nodes, down)
                    heapq.heappush(open_nodes, up)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    wall_time = time.monotonic() - started
    remaining = open_bound() if stopped else -math.inf
    # drop open nodes that cannot beat the incumbent anyway
    if stopped and remaining <= incumbent_score + tol:
        stopped = False

    if incumbent_values is None:
        status = NODE_LIMIT if stopped else INFEASIBLE_STATUS
        logger.info("no incumbent after %d nodes: %s", nodes, status)
        return SolveResult(status, nodes=nodes, lp_iterations=lp_iterations, wall_time=wall_time, trace=trace)

    objective = sign * incumbent_score
    bound = sign * max(incumbent_score, remaining)
    status = FEASIBLE if stopped else OPTIMAL
    logger.info("%s objective %.9g (bound %.9g) after %d nodes", status, objective, bound, nodes)
    return SolveResult(
        status,
        objective=objective,
        assignment=Assignment.from_vector(model, incumbent_values),
        bound=bound,
        nodes=nodes,
        lp_iterations=lp_iterations,
        wall_time=wall_time,
        trace=trace,
    )

