"""Bounded-variable primal simplex on a dense tableau.

Every row gets a slack with bounds [0, inf) for <=, (-inf, 0] for >= and [0, 0] for =,
so rows read A x + s = b. Rows whose slack cannot absorb the initial residual get an
artificial variable, driven to zero in phase 1.
"""
import logging
import math

import numpy as np

from ..errors import NumericalFailure
from .model import GE, LE, MINIMIZE, MilpModel

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
OPTIMALITY_TOL = 1e-9
PIVOT_TOL = 1e-9
DEGENERATE_STEP = 1e-12
# consecutive degenerate pivots before switching to Bland's rule
DEGENERATE_LIMIT = 50
REFACTOR_EVERY = 100

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpResult:
    def __init__(self, status: str, objective: float = None, values=None, iterations: int = 0):
        self.status = status
        self.objective = objective
        self.values = values
        self.iterations = iterations

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL

    def __repr__(self) -> str:
        return f"LpResult({self.status}, objective={self.objective}, iterations={self.iterations})"


def _resting_value(lo: float, hi: float) -> float:
    if not math.isinf(lo):
        return lo
    if not math.isinf(hi):
        return hi
    return 0.0


class _Tableau:
    def __init__(self, A: np.ndarray, senses, b: np.ndarray, lower: np.ndarray, upper: np.ndarray):
        m, n = A.shape
        self.m, self.n = m, n
        self.b = b

        slack_lo = np.array([0.0 if s == LE else (-math.inf if s == GE else 0.0) for s in senses])
        slack_hi = np.array([math.inf if s == LE else 0.0 for s in senses])

        self.A = np.hstack([A, np.eye(m), np.zeros((m, m))])
        self.lo = np.concatenate([lower, slack_lo, np.zeros(m)])
        self.hi = np.concatenate([upper, slack_hi, np.zeros(m)])

        x = np.zeros(n + 2 * m)
        for j in range(n):
            x[j] = _resting_value(self.lo[j], self.hi[j])
        residual = b - A @ x[:n]

        basis = np.empty(m, dtype=int)
        diagonal = np.ones(m)
        self.artificials = []
        for i in range(m):
            slack = n + i
            art = n + m + i
            if slack_lo[i] - FEASIBILITY_TOL <= residual[i] <= slack_hi[i] + FEASIBILITY_TOL:
                x[slack] = residual[i]
                basis[i] = slack
                self.A[i, art] = 1.0
            else:
                clamped = min(max(residual[i], slack_lo[i]), slack_hi[i])
                x[slack] = clamped
                sign = 1.0 if residual[i] > clamped else -1.0
                self.A[i, art] = sign
                self.hi[art] = math.inf
                x[art] = abs(residual[i] - clamped)
                basis[i] = art
                diagonal[i] = sign
                self.artificials.append(art)

        self.x = x
        self.basis = basis
        self.M = self.A / diagonal[:, None]
        self.iterations = 0

    def refactor(self) -> None:
        B = self.A[:, self.basis]
        nonbasic = self.x.copy()
        nonbasic[self.basis] = 0.0
        try:
            self.M = np.linalg.solve(B, self.A)
            self.x[self.basis] = np.linalg.solve(B, self.b - self.A @ nonbasic)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"singular basis after {self.iterations} iterations") from exc

    def _entering(self, d: np.ndarray, bland: bool):
        movable = self.hi - self.lo > FEASIBILITY_TOL
        up = (d > OPTIMALITY_TOL) & (self.x < self.hi - FEASIBILITY_TOL)
        down = (d < -OPTIMALITY_TOL) & (self.x > self.lo + FEASIBILITY_TOL)
        eligible = movable & (up | down)
        eligible[self.basis] = False
        candidates = np.flatnonzero(eligible)
        if candidates.size == 0:
            return None
        if bland:
            return int(candidates[0])
        return int(candidates[np.argmax(np.abs(d[candidates]))])

    def _pivot(self, row: int, col: int) -> None:
        self.M[row] /= self.M[row, col]
        factors = self.M[:, col].copy()
        factors[row] = 0.0
        self.M -= np.outer(factors, self.M[row])
        self.basis[row] = col

    def run(self, cost: np.ndarray, limit: int) -> str:
        degenerate = 0
        bland = False
        while True:
            if self.iterations >= limit:
                raise NumericalFailure(f"simplex iteration limit {limit} reached")
            if self.iterations and self.iterations % REFACTOR_EVERY == 0:
                self.refactor()

            d = cost - cost[self.basis] @ self.M
            j = self._entering(d, bland)
            if j is None:
                return OPTIMAL
            direction = 1.0 if d[j] > 0 else -1.0
            column = self.M[:, j] * direction

            theta = self.hi[j] - self.lo[j]
            leave, leave_to = None, None
            for i in range(self.m):
                k = self.basis[i]
                a = column[i]
                if a > PIVOT_TOL and not math.isinf(self.lo[k]):
                    ratio, bound = (self.x[k] - self.lo[k]) / a, self.lo[k]
                elif a < -PIVOT_TOL and not math.isinf(self.hi[k]):
                    ratio, bound = (self.hi[k] - self.x[k]) / -a, self.hi[k]
                else:
                    continue
                ratio = max(ratio, 0.0)
                if ratio < theta - DEGENERATE_STEP:
                    theta, leave, leave_to = ratio, i, bound
                elif bland and leave is not None and abs(ratio - theta) <= DEGENERATE_STEP and k < self.basis[leave]:
                    leave, leave_to = i, bound
            if math.isinf(theta):
                return UNBOUNDED

            self.iterations += 1
            self.x[self.basis] -= theta * column
            if leave is None:
                self.x[j] = self.hi[j] if direction > 0 else self.lo[j]
            else:
                self.x[j] += theta * direction
                self.x[self.basis[leave]] = leave_to
                self._pivot(leave, j)

            if theta <= DEGENERATE_STEP:
                degenerate += 1
                if degenerate > DEGENERATE_LIMIT and not bland:
                    logger.debug("switching to Bland's rule after %d degenerate pivots", degenerate)
                    bland = True
            else:
                degenerate = 0


def _without_rows(lower, upper, c):
    """Optimum of max c.x over the box alone."""
    x = np.zeros(len(c))
    for j, coef in enumerate(c):
        if coef > 0:
            x[j] = upper[j]
        elif coef < 0:
            x[j] = lower[j]
        else:
            x[j] = _resting_value(lower[j], upper[j])
    if np.any(np.isinf(x)):
        return None
    return x


def solve_lp(model: MilpModel, lower=None, upper=None, max_iterations: int = None) -> LpResult:
    """Solves the LP relaxation of model, optionally under tightened variable bounds."""
    base_lower, base_upper = model.bounds()
    lower = base_lower if lower is None else np.asarray(lower, dtype=float)
    upper = base_upper if upper is None else np.asarray(upper, dtype=float)
    if np.any(lower > upper + FEASIBILITY_TOL):
        return LpResult(INFEASIBLE)

    sign = -1.0 if model.sense == MINIMIZE else 1.0
    c = sign * model.objective_vector()
    A, senses, b = model.dense_rows()
    m, n = A.shape

    if m == 0:
        x = _without_rows(lower, upper, c)
        if x is None:
            return LpResult(UNBOUNDED)
        return LpResult(OPTIMAL, model.objective_value(x), x, 0)

    tableau = _Tableau(A, senses, b, lower, upper)
    limit = max_iterations or 50 * (m + n) + 5000

    if tableau.artificials:
        phase_one = np.zeros(n + 2 * m)
        phase_one[tableau.artificials] = -1.0
        tableau.run(phase_one, limit)
        tableau.refactor()
        infeasibility = float(np.sum(tableau.x[tableau.artificials]))
        if infeasibility > 1e-7 * max(1.0, float(np.max(np.abs(b)))):
            return LpResult(INFEASIBLE, iterations=tableau.iterations)
        tableau.hi[n + m:] = 0.0
        tableau.x[n + m:] = 0.0

    cost = np.concatenate([c, np.zeros(2 * m)])
    status = tableau.run(cost, limit)
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, iterations=tableau.iterations)
    tableau.refactor()

    x = tableau.x[:n]
    violation = np.maximum(lower - x, x - upper)
    if np.any(violation > 1e-6):
        raise NumericalFailure(f"basic solution leaves its bounds by {float(np.max(violation)):g}")
    x = np.clip(x, lower, upper)
    return LpResult(OPTIMAL, model.objective_value(x), x, tableau.iterations)
