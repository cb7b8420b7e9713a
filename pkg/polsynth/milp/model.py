import math
import re

import numpy as np

from ..errors import MissingVariable

CONTINUOUS = "continuous"
BINARY = "binary"

LE = "<="
GE = ">="
EQ = "="

MAXIMIZE = "max"
MINIMIZE = "min"

_UNSAFE = re.compile(r"[^A-Za-z0-9_]")


class Variable:
    def __init__(self, index: int, name: str, kind: str, lb: float, ub: float):
        self.index = index
        self.name = name
        self.kind = kind
        self.lb = lb
        self.ub = ub

    @property
    def is_binary(self) -> bool:
        return self.kind == BINARY

    def __repr__(self) -> str:
        return f"Variable({self.name}, {self.kind}, [{self.lb}, {self.ub}])"


class Constraint:
    """sum(coef * x[index] for index, coef in terms) <sense> rhs"""

    def __init__(self, terms, sense: str, rhs: float, name: str = None):
        self.terms = tuple(terms)
        self.sense = sense
        self.rhs = float(rhs)
        self.name = name

    def activity(self, values) -> float:
        return sum(coef * values[index] for index, coef in self.terms)

    def violation(self, values) -> float:
        lhs = self.activity(values)
        if self.sense == LE:
            return max(0.0, lhs - self.rhs)
        if self.sense == GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)

    def __repr__(self) -> str:
        return f"Constraint({self.name}: {len(self.terms)} terms {self.sense} {self.rhs:g})"


class MilpModel:
    """Solver-independent MILP: bounded variables, linear rows and a linear objective.

    Terms are given as {variable index: coefficient}; repeated indices are summed and
    zero coefficients dropped, so constraints are stored in a canonical order.
    """

    def __init__(self, name: str = "polsynth"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.sense = MAXIMIZE
        self.objective: dict = {}
        self.objective_constant = 0.0
        self._by_name: dict = {}

    def add_variable(self, name: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = 1.0) -> int:
        if name in self._by_name:
            raise ValueError(f"duplicate variable name {name}")
        if kind == BINARY:
            lb, ub = 0.0, 1.0
        index = len(self.variables)
        self.variables.append(Variable(index, name, kind, float(lb), float(ub)))
        self._by_name[name] = index
        return index

    def add_binary(self, name: str) -> int:
        return self.add_variable(name, BINARY)

    def _canonical(self, terms: dict) -> list:
        merged = {}
        for index, coef in terms.items():
            if not 0 <= index < len(self.variables):
                raise MissingVariable(f"constraint references undeclared variable {index}")
            merged[index] = merged.get(index, 0.0) + float(coef)
        return [(index, coef) for index, coef in sorted(merged.items()) if coef != 0.0]

    def add_constraint(self, terms: dict, sense: str, rhs: float, name: str = None) -> int:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"unknown relation {sense}")
        name = name or f"c{len(self.constraints)}"
        self.constraints.append(Constraint(self._canonical(terms), sense, rhs, name))
        return len(self.constraints) - 1

    def set_objective(self, sense: str, terms: dict, constant: float = 0.0) -> None:
        if sense not in (MAXIMIZE, MINIMIZE):
            raise ValueError(f"unknown objective sense {sense}")
        self.sense = sense
        self.objective = dict(self._canonical(terms))
        self.objective_constant = float(constant)

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def variable(self, name: str) -> Variable:
        if name not in self._by_name:
            raise MissingVariable(f"unknown variable {name}")
        return self.variables[self._by_name[name]]

    def has_variable(self, name: str) -> bool:
        return name in self._by_name

    def binary_indices(self) -> list:
        return [v.index for v in self.variables if v.is_binary]

    def bounds(self):
        lower = np.array([v.lb for v in self.variables], dtype=float)
        upper = np.array([v.ub for v in self.variables], dtype=float)
        return lower, upper

    def dense_rows(self):
        """(A, senses, b) with one dense row per constraint."""
        A = np.zeros((len(self.constraints), len(self.variables)))
        for i, row in enumerate(self.constraints):
            for index, coef in row.terms:
                A[i, index] = coef
        senses = [row.sense for row in self.constraints]
        b = np.array([row.rhs for row in self.constraints], dtype=float)
        return A, senses, b

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(len(self.variables))
        for index, coef in self.objective.items():
            c[index] = coef
        return c

    def objective_value(self, values) -> float:
        return self.objective_constant + sum(coef * values[index] for index, coef in self.objective.items())

    def export_names(self) -> list:
        """Variable names restricted to [A-Za-z0-9_], made unique deterministically."""
        names = []
        taken = set()
        for v in self.variables:
            base = _UNSAFE.sub("_", v.name).strip("_") or "x"
            if base[0].isdigit() or base[0] in "eE":
                base = "x_" + base
            name = base
            k = 1
            while name in taken:
                name = f"{base}_{k}"
                k += 1
            taken.add(name)
            names.append(name)
        return names

    def __repr__(self) -> str:
        binaries = len(self.binary_indices())
        return (
            f"MilpModel({self.name}: {self.num_variables} variables ({binaries} binary), "
            f"{self.num_constraints} constraints)"
        )


class Assignment:
    """Variable values keyed by variable name."""

    def __init__(self, values: dict = None):
        self.values = dict(values or {})

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.values == other.values

    def get(self, name: str, default=None):
        return self.values.get(name, default)

    def vector(self, model: MilpModel) -> list:
        missing = [v.name for v in model.variables if v.name not in self.values]
        if missing:
            raise MissingVariable("assignment lacks " + ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else ""))
        return [float(self.values[v.name]) for v in model.variables]

    @staticmethod
    def from_vector(model: MilpModel, values) -> "Assignment":
        return Assignment({v.name: float(x) for v, x in zip(model.variables, values)})

    def to_dict(self) -> dict:
        return dict(self.values)


def violations(model: MilpModel, assignment: Assignment, tol: float) -> list:
    """Every bound, integrality and row violation larger than tol, as messages."""
    x = assignment.vector(model)
    problems = []
    for v in model.variables:
        value = x[v.index]
        if math.isnan(value):
            problems.append(f"{v.name} is not a number")
            continue
        if value < v.lb - tol or value > v.ub + tol:
            problems.append(f"{v.name}={value:g} outside [{v.lb:g}, {v.ub:g}]")
        if v.is_binary and min(abs(value), abs(value - 1.0)) > tol:
            problems.append(f"{v.name}={value:g} is not integral")
    for row in model.constraints:
        excess = row.violation(x)
        if excess > tol:
            problems.append(f"{row.name} violated by {excess:g}")
    return problems


def check_feasible(model: MilpModel, assignment: Assignment, tol: float = 1e-6) -> bool:
    return not violations(model, assignment, tol)


def read_assignment(text: str, model: MilpModel = None) -> Assignment:
    """Reads `name value` lines as written by external solvers; `#` starts a comment."""
    values = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"expected `name value`, got {raw!r}")
        values[parts[0]] = float(parts[1])
    if model is None:
        return Assignment(values)
    # LP export names map back to the model's own names
    exported = dict(zip(model.export_names(), (v.name for v in model.variables)))
    assignment = Assignment({exported.get(name, name): value for name, value in values.items()})
    assignment.vector(model)
    return assignment
