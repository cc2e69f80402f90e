import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from pv_resiliency.errors import ConfigurationError, InvalidProblem

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-7
INTEGRALITY_TOL = 1e-6
GAP_TOL = 1e-6


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NODE_LIMIT = "NodeLimit"
    STALLED = "Stalled"


@dataclass
class Constraint:
    coefs: dict
    sense: Sense
    rhs: float
    name: str = ""


@dataclass
class MilpProblem:
    """Minimisation problem with bounded columns, linear rows and binary markers.

    Columns are added one at a time with ``add_variable`` and rows with
    ``add_constraint``; both return the new index. Coefficients are kept
    sparse (``{column: value}``) until ``dense()`` is called by the solver.
    """

    num_vars: int = 0
    objective: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    lower: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    binary: list = field(default_factory=list)
    names: list = field(default_factory=list)

    def add_variable(self, lo=0.0, hi=math.inf, cost=0.0, binary=False, name=None):
        index = self.num_vars
        if binary:
            lo, hi = max(float(lo), 0.0), min(float(hi), 1.0)
        self.lower.append(float(lo))
        self.upper.append(float(hi))
        self.binary.append(bool(binary))
        self.names.append(name or f"x{index}")
        if cost:
            self.objective[index] = float(cost)
        self.num_vars += 1
        return index

    def add_constraint(self, coefs, sense, rhs, name=None):
        row = Constraint(coefs={int(k): float(v) for k, v in coefs.items() if v != 0.0}, sense=Sense(sense), rhs=float(rhs))
        row.name = name or f"c{len(self.constraints)}"
        self.constraints.append(row)
        return len(self.constraints) - 1

    @classmethod
    def from_dict(cls, data):
        """Builds a problem from ``{"variables": [...], "constraints": [...]}``.

        Variables take ``name``, ``lo``, ``hi`` (null for infinite), ``cost`` and
        ``binary``; constraint coefficients are keyed by variable name.
        """
        if not isinstance(data, dict) or not data.get("variables"):
            raise InvalidProblem("Problem needs a non-empty 'variables' list")
        p = cls()
        index = {}
        for entry in data["variables"]:
            name = entry.get("name") or f"x{p.num_vars}"
            if name in index:
                raise InvalidProblem(f"Duplicate variable name '{name}'")
            lo = entry.get("lo", 0.0)
            hi = entry.get("hi", math.inf)
            index[name] = p.add_variable(
                -math.inf if lo is None else lo,
                math.inf if hi is None else hi,
                cost=entry.get("cost", 0.0),
                binary=bool(entry.get("binary", False)),
                name=name,
            )
        for entry in data.get("constraints") or []:
            unknown = set(entry.get("coefs", {})) - set(index)
            if unknown:
                raise InvalidProblem(f"Constraint references unknown variables {sorted(unknown)}")
            try:
                sense = Sense(entry.get("sense", "<="))
            except ValueError as e:
                raise InvalidProblem(f"Unknown constraint sense '{entry.get('sense')}'") from e
            p.add_constraint({index[k]: v for k, v in entry["coefs"].items()}, sense, entry["rhs"], name=entry.get("name"))
        p.validate()
        return p

    def set_bounds(self, index, lo, hi):
        self.lower[index] = float(lo)
        self.upper[index] = float(hi)

    def validate(self):
        n = self.num_vars
        if not (len(self.lower) == len(self.upper) == len(self.binary) == n):
            raise InvalidProblem(f"Bound arrays do not match num_vars={n}")
        for j in range(n):
            lo, hi = self.lower[j], self.upper[j]
            if math.isnan(lo) or math.isnan(hi):
                raise InvalidProblem(f"NaN bound on column {self.names[j]}")
            if self.binary[j] and (lo < 0.0 or hi > 1.0):
                raise InvalidProblem(f"Binary column {self.names[j]} has bounds [{lo}, {hi}] outside [0, 1]")
        for j, value in self.objective.items():
            if not 0 <= j < n:
                raise InvalidProblem(f"Objective index {j} out of range")
            if not math.isfinite(value):
                raise InvalidProblem(f"Non-finite objective coefficient on column {j}")
        for row in self.constraints:
            if not math.isfinite(row.rhs):
                raise InvalidProblem(f"Non-finite rhs on row {row.name}")
            for j, value in row.coefs.items():
                if not 0 <= j < n:
                    raise InvalidProblem(f"Row {row.name} references column {j} out of range")
                if not math.isfinite(value):
                    raise InvalidProblem(f"Non-finite coefficient in row {row.name}")

    def dense(self):
        """Returns (c, A, senses, b, lower, upper) as numpy arrays."""
        n, m = self.num_vars, len(self.constraints)
        c = np.zeros(n)
        for j, value in self.objective.items():
            c[j] = value
        A = np.zeros((m, n))
        b = np.zeros(m)
        senses = []
        for i, row in enumerate(self.constraints):
            for j, value in row.coefs.items():
                A[i, j] = value
            b[i] = row.rhs
            senses.append(row.sense)
        return c, A, senses, b, np.array(self.lower, dtype=float), np.array(self.upper, dtype=float)

    def binary_indices(self):
        return np.flatnonzero(np.array(self.binary, dtype=bool))

    def evaluate(self, x):
        return float(sum(value * x[j] for j, value in self.objective.items()))

    def max_violation(self, x):
        """Largest bound or row violation of x, row violations scaled by the row norm."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        lo, hi = np.array(self.lower), np.array(self.upper)
        worst = max(worst, float(np.max(lo - x, initial=0.0)), float(np.max(x - hi, initial=0.0)))
        for row in self.constraints:
            activity = sum(value * x[j] for j, value in row.coefs.items())
            scale = max(1.0, math.sqrt(sum(v * v for v in row.coefs.values())))
            if row.sense == Sense.LE:
                gap = activity - row.rhs
            elif row.sense == Sense.GE:
                gap = row.rhs - activity
            else:
                gap = abs(activity - row.rhs)
            worst = max(worst, gap / scale)
        return worst

    def is_feasible(self, x, tol=FEASIBILITY_TOL):
        return self.max_violation(x) <= tol


@dataclass
class MilpSolution:
    status: SolveStatus
    x: np.ndarray = None
    objective_value: float = math.inf
    nodes_explored: int = 0
    solve_time: float = 0.0
    iterations: int = 0
    best_bound: float = -math.inf
    duals: np.ndarray = None
    reduced_costs: np.ndarray = None

    @property
    def has_solution(self):
        return self.x is not None

    def to_dict(self):
        return {
            "status": self.status.value,
            "x": None if self.x is None else [float(v) for v in self.x],
            "objective_value": None if not math.isfinite(self.objective_value) else self.objective_value,
            "nodes_explored": self.nodes_explored,
            "solve_time": self.solve_time,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class SolverLimits:
    node_limit: int = 100000
    time_limit: float = 10.0

    def __post_init__(self):
        if self.node_limit < 1:
            raise ConfigurationError(f"node_limit must be >= 1, got {self.node_limit}")
        if not self.time_limit > 0:
            raise ConfigurationError(f"time_limit must be > 0, got {self.time_limit}")

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        unknown = set(data) - {"node_limit", "time_limit"}
        if unknown:
            raise ConfigurationError(f"Unknown solver settings: {sorted(unknown)}")
        return cls(node_limit=int(data.get("node_limit", 100000)), time_limit=float(data.get("time_limit", 10.0)))
