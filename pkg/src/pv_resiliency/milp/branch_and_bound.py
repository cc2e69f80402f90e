import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from pv_resiliency.milp.problem import (
    FEASIBILITY_TOL,
    GAP_TOL,
    INTEGRALITY_TOL,
    MilpProblem,
    MilpSolution,
    SolverLimits,
    SolveStatus,
)
from pv_resiliency.milp.simplex import BasisSnapshot, BoundedSimplex, LpResult

logger = logging.getLogger(__name__)


@dataclass
class Incumbent:
    x: np.ndarray
    objective: float


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lower: np.ndarray = field(compare=False)
    upper: np.ndarray = field(compare=False)
    warm: BasisSnapshot = field(compare=False)


def _snap_binaries(x, binaries):
    x = x.copy()
    x[binaries] = np.round(x[binaries])
    return x


def warm_hint(problem: MilpProblem, hint) -> Incumbent | None:
    """Turns a full-length hint into an incumbent, or None if it does not lead to a feasible point.

    Binaries are rounded and fixed, then the continuous part is completed by one LP solve.
    """
    hint = np.asarray(hint, dtype=float)
    if hint.shape != (problem.num_vars,):
        logger.debug(f"Ignoring hint of length {hint.size} for {problem.num_vars} columns")
        return None
    binaries = problem.binary_indices()
    lower = np.array(problem.lower, dtype=float)
    upper = np.array(problem.upper, dtype=float)
    values = np.round(np.clip(hint[binaries], 0.0, 1.0))
    if np.any(values < lower[binaries]) or np.any(values > upper[binaries]):
        return None
    lower[binaries] = values
    upper[binaries] = values
    result = BoundedSimplex(problem).solve(lower, upper)
    if result.status != SolveStatus.OPTIMAL:
        logger.debug(f"Hint completion returned {result.status.value}")
        return None
    x = _snap_binaries(result.x, binaries)
    if not problem.is_feasible(x):
        return None
    return Incumbent(x=x, objective=problem.evaluate(x))


class BranchAndBound:
    """Best-first branch and bound with diving, warm-started by the dual simplex."""

    def __init__(self, problem: MilpProblem, limits: SolverLimits = None, incumbent: Incumbent = None):
        problem.validate()
        self.problem = problem
        self.limits = limits or SolverLimits()
        self.binaries = problem.binary_indices()
        self.engine = BoundedSimplex(problem)
        self.incumbent = incumbent
        self.nodes = 0
        self.iterations = 0
        self._seq = 0
        self._heap = []

    def _branch_variable(self, x):
        if self.binaries.size == 0:
            return None
        values = x[self.binaries]
        fractional = np.abs(values - np.round(values)) > INTEGRALITY_TOL
        if not fractional.any():
            return None
        distance = np.where(fractional, np.abs(values - 0.5), math.inf)
        return int(self.binaries[int(np.argmin(distance))])

    def _cutoff(self):
        return self.incumbent.objective - GAP_TOL if self.incumbent is not None else math.inf

    def _solve_node(self, lower, upper, warm):
        self.nodes += 1
        if warm is None:
            result = self.engine.solve(lower, upper)
        else:
            result = self.engine.resolve(lower, upper, warm)
        self.iterations += result.iterations
        return result

    def _push(self, bound, lower, upper, warm):
        self._seq += 1
        heapq.heappush(self._heap, _Node(bound=bound, seq=self._seq, lower=lower, upper=upper, warm=warm))

    def _limit_reached(self, started):
        if self.nodes >= self.limits.node_limit:
            return SolveStatus.NODE_LIMIT
        if time.perf_counter() - started >= self.limits.time_limit:
            return SolveStatus.STALLED
        return None

    def _dive(self, result: LpResult, lower, upper, started):
        """Follows the child rounded toward the relaxation until pruned, integral or out of budget."""
        while True:
            if result.status == SolveStatus.INFEASIBLE:
                return None
            if result.status != SolveStatus.OPTIMAL:
                return SolveStatus.STALLED if result.status == SolveStatus.STALLED else result.status
            if result.objective >= self._cutoff():
                return None
            j = self._branch_variable(result.x)
            if j is None:
                x = _snap_binaries(result.x, self.binaries)
                self.incumbent = Incumbent(x=x, objective=self.problem.evaluate(x))
                logger.debug(f"New incumbent {self.incumbent.objective:.6g} at node {self.nodes}")
                return None
            warm = self.engine.snapshot()
            preferred = 1.0 if result.x[j] >= 0.5 else 0.0
            other_lower, other_upper = lower.copy(), upper.copy()
            other_lower[j] = other_upper[j] = 1.0 - preferred
            self._push(result.objective, other_lower, other_upper, warm)
            lower, upper = lower.copy(), upper.copy()
            lower[j] = upper[j] = preferred
            stop = self._limit_reached(started)
            if stop is not None:
                return stop
            result = self._solve_node(lower, upper, warm)

    def solve(self) -> MilpSolution:
        started = time.perf_counter()
        lower = np.array(self.problem.lower, dtype=float)
        upper = np.array(self.problem.upper, dtype=float)
        root = self._solve_node(lower, upper, None)
        if root.status == SolveStatus.UNBOUNDED:
            return self._result(SolveStatus.UNBOUNDED, started)
        if root.status == SolveStatus.INFEASIBLE:
            return self._result(SolveStatus.INFEASIBLE, started)
        stop = self._dive(root, lower, upper, started)
        while stop is None and self._heap:
            node = heapq.heappop(self._heap)
            if node.bound >= self._cutoff():
                continue
            stop = self._limit_reached(started)
            if stop is not None:
                heapq.heappush(self._heap, node)
                break
            result = self._solve_node(node.lower, node.upper, node.warm)
            stop = self._dive(result, node.lower, node.upper, started)
        if stop == SolveStatus.UNBOUNDED:
            return self._result(SolveStatus.UNBOUNDED, started)
        if stop is not None:
            logger.info(f"Branch and bound stopped with {stop.value} after {self.nodes} nodes")
            return self._result(stop, started)
        return self._result(SolveStatus.OPTIMAL if self.incumbent is not None else SolveStatus.INFEASIBLE, started)

    def _result(self, status, started):
        elapsed = time.perf_counter() - started
        open_bounds = [node.bound for node in self._heap]
        if self.incumbent is None:
            best_bound = min(open_bounds, default=-math.inf)
            return MilpSolution(status=status, nodes_explored=self.nodes, solve_time=elapsed, iterations=self.iterations, best_bound=best_bound)
        best_bound = min(open_bounds + [self.incumbent.objective]) if status != SolveStatus.OPTIMAL else self.incumbent.objective
        return MilpSolution(
            status=status,
            x=self.incumbent.x,
            objective_value=self.incumbent.objective,
            nodes_explored=self.nodes,
            solve_time=elapsed,
            iterations=self.iterations,
            best_bound=best_bound,
        )


def solve_milp(problem: MilpProblem, limits: SolverLimits = None, incumbent: Incumbent = None) -> MilpSolution:
    """Solves the problem to optimality within the limits.

    On NodeLimit or Stalled the best incumbent found so far is returned, if any.
    """
    solution = BranchAndBound(problem, limits=limits, incumbent=incumbent).solve()
    if solution.x is not None and not problem.is_feasible(solution.x, tol=10 * FEASIBILITY_TOL):
        logger.warning(f"Returned point violates rows by {problem.max_violation(solution.x):.3e}")
    logger.debug(
        f"MILP {solution.status.value}: objective={solution.objective_value:.6g} nodes={solution.nodes_explored} time={solution.solve_time:.3f}s"
    )
    return solution
