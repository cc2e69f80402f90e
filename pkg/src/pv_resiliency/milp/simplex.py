import logging
import math
from dataclasses import dataclass

import numpy as np

from pv_resiliency.milp.problem import FEASIBILITY_TOL, MilpProblem, MilpSolution, Sense, SolveStatus

logger = logging.getLogger(__name__)

BASIC = 0
AT_LOWER = 1
AT_UPPER = 2
FREE = 3

OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
STEP_TOL = 1e-12


@dataclass
class LpResult:
    status: SolveStatus
    x: np.ndarray = None
    objective: float = math.inf
    duals: np.ndarray = None
    reduced_costs: np.ndarray = None
    iterations: int = 0


@dataclass
class BasisSnapshot:
    basis: np.ndarray
    status: np.ndarray
    x: np.ndarray


class BoundedSimplex:
    """Revised simplex over bounded columns with a dense basis inverse.

    Every row i gets a slack column s_i and an artificial column a_i so that
    ``A x + s + sigma a = b``. The slack carries the row sense through its
    bounds. Artificials are only free to move during phase 1.
    """

    def __init__(self, problem: MilpProblem, refactor_every=50, degeneracy_threshold=50, max_iterations=None):
        c, A, senses, b, lo, hi = problem.dense()
        m, n = A.shape
        self.m, self.n = m, n
        self.A = np.hstack([A, np.eye(m), np.eye(m)])
        self.b = b
        self.cost = np.concatenate([c, np.zeros(2 * m)])
        slack_lo = np.array([-math.inf if s == Sense.GE else 0.0 for s in senses])
        slack_hi = np.array([math.inf if s == Sense.LE else 0.0 for s in senses])
        self.base_lower = np.concatenate([lo, slack_lo, np.zeros(m)])
        self.base_upper = np.concatenate([hi, slack_hi, np.zeros(m)])
        self.lower = self.base_lower.copy()
        self.upper = self.base_upper.copy()
        self.refactor_every = refactor_every
        self.degeneracy_threshold = degeneracy_threshold
        self.max_iterations = max_iterations or 20 * (m + n) + 1000
        self.basis = np.zeros(m, dtype=int)
        self.status = np.zeros(n + 2 * m, dtype=int)
        self.x = np.zeros(n + 2 * m)
        self.B_inv = np.eye(m)
        self.iterations = 0
        self._pivots_since_refactor = 0

    # ------------------------------------------------------------------ basis

    def _refactor(self):
        self.B_inv = np.linalg.inv(self.A[:, self.basis]) if self.m else np.zeros((0, 0))
        self._pivots_since_refactor = 0
        x_n = self.x.copy()
        x_n[self.basis] = 0.0
        self.x[self.basis] = self.B_inv @ (self.b - self.A @ x_n)

    def _pivot(self, row, entering, column):
        pivot = column[row]
        eta = -column / pivot
        eta[row] = 1.0 / pivot
        pivot_row = self.B_inv[row, :].copy()
        self.B_inv += np.outer(eta, pivot_row)
        self.B_inv[row, :] = eta[row] * pivot_row
        self.basis[row] = entering
        self.status[entering] = BASIC
        self._pivots_since_refactor += 1
        if self._pivots_since_refactor >= self.refactor_every:
            self._refactor()

    def _reduced_costs(self, cost):
        y = cost[self.basis] @ self.B_inv
        return y, cost - y @ self.A

    def _place_nonbasic(self, j):
        lo, hi = self.lower[j], self.upper[j]
        if self.status[j] == AT_UPPER and math.isfinite(hi):
            self.x[j] = hi
        elif math.isfinite(lo):
            self.status[j] = AT_LOWER
            self.x[j] = lo
        elif math.isfinite(hi):
            self.status[j] = AT_UPPER
            self.x[j] = hi
        else:
            self.status[j] = FREE
            self.x[j] = 0.0

    # ----------------------------------------------------------------- primal

    def _primal(self, cost):
        degenerate_run = 0
        while True:
            if self.iterations >= self.max_iterations:
                return "iteration_limit"
            _, d = self._reduced_costs(cost)
            movable = self.upper > self.lower
            improving = (
                ((self.status == AT_LOWER) & movable & (d < -OPT_TOL))
                | ((self.status == AT_UPPER) & movable & (d > OPT_TOL))
                | ((self.status == FREE) & (np.abs(d) > OPT_TOL))
            )
            candidates = np.flatnonzero(improving)
            if candidates.size == 0:
                return "optimal"
            if degenerate_run >= self.degeneracy_threshold:
                q = int(candidates[0])
            else:
                q = int(candidates[np.argmax(np.abs(d[candidates]))])
            direction = 1.0 if d[q] < 0 else -1.0
            column = self.B_inv @ self.A[:, q]
            delta = -direction * column
            x_b = self.x[self.basis]
            limits = np.full(self.m, math.inf)
            down = delta < -PIVOT_TOL
            up = delta > PIVOT_TOL
            lo_b, hi_b = self.lower[self.basis], self.upper[self.basis]
            with np.errstate(invalid="ignore"):
                limits[down] = (x_b[down] - lo_b[down]) / -delta[down]
                limits[up] = (hi_b[up] - x_b[up]) / delta[up]
            limits = np.where(np.isnan(limits), math.inf, np.maximum(limits, 0.0))
            step = float(np.min(limits)) if self.m else math.inf
            span = self.upper[q] - self.lower[q]
            if step == math.inf and span == math.inf:
                return "unbounded"
            self.iterations += 1
            if span <= step:
                self.x[self.basis] = x_b + delta * span
                self.x[q] += direction * span
                self.status[q] = AT_UPPER if direction > 0 else AT_LOWER
                degenerate_run = 0 if span > STEP_TOL else degenerate_run + 1
                continue
            ties = np.flatnonzero(limits <= step + STEP_TOL)
            if degenerate_run >= self.degeneracy_threshold:
                row = int(ties[np.argmin(self.basis[ties])])
            else:
                row = int(ties[np.argmax(np.abs(column[ties]))])
            leaving = self.basis[row]
            self.x[self.basis] = x_b + delta * step
            self.x[q] += direction * step
            if delta[row] < 0:
                self.status[leaving], self.x[leaving] = AT_LOWER, self.lower[leaving]
            else:
                self.status[leaving], self.x[leaving] = AT_UPPER, self.upper[leaving]
            degenerate_run = 0 if step > STEP_TOL else degenerate_run + 1
            self._pivot(row, q, column)

    # ------------------------------------------------------------------- dual

    def _dual(self):
        while True:
            if self.iterations >= self.max_iterations:
                return "iteration_limit"
            x_b = self.x[self.basis]
            lo_b, hi_b = self.lower[self.basis], self.upper[self.basis]
            below = lo_b - x_b
            above = x_b - hi_b
            infeasibility = np.maximum(below, above)
            if self.m == 0 or float(np.max(infeasibility)) <= FEASIBILITY_TOL:
                return "optimal"
            row = int(np.argmax(infeasibility))
            to_lower = below[row] >= above[row]
            target = lo_b[row] if to_lower else hi_b[row]
            alpha = self.B_inv[row, :] @ self.A
            _, d = self._reduced_costs(self.cost)
            movable = (self.status != BASIC) & (self.upper > self.lower)
            if to_lower:
                eligible = movable & (
                    ((self.status == AT_LOWER) & (alpha < -PIVOT_TOL))
                    | ((self.status == AT_UPPER) & (alpha > PIVOT_TOL))
                    | ((self.status == FREE) & (np.abs(alpha) > PIVOT_TOL))
                )
            else:
                eligible = movable & (
                    ((self.status == AT_LOWER) & (alpha > PIVOT_TOL))
                    | ((self.status == AT_UPPER) & (alpha < -PIVOT_TOL))
                    | ((self.status == FREE) & (np.abs(alpha) > PIVOT_TOL))
                )
            candidates = np.flatnonzero(eligible)
            if candidates.size == 0:
                return "infeasible"
            ratios = np.abs(d[candidates]) / np.abs(alpha[candidates])
            best = float(np.min(ratios))
            ties = candidates[ratios <= best + STEP_TOL]
            q = int(ties[np.argmax(np.abs(alpha[ties]))])
            leaving = self.basis[row]
            move = (x_b[row] - target) / alpha[q]
            column = self.B_inv @ self.A[:, q]
            self.x[self.basis] = x_b - column * move
            self.x[q] += move
            self.x[leaving] = target
            self.status[leaving] = AT_LOWER if to_lower else AT_UPPER
            self.iterations += 1
            self._pivot(row, q, column)

    # ---------------------------------------------------------------- drivers

    def _set_structural_bounds(self, lower, upper):
        self.lower = self.base_lower.copy()
        self.upper = self.base_upper.copy()
        if lower is not None:
            self.lower[: self.n] = lower
        if upper is not None:
            self.upper[: self.n] = upper

    def solve(self, lower=None, upper=None):
        """Cold two-phase solve, optionally with overridden structural bounds."""
        self._set_structural_bounds(lower, upper)
        self.iterations = 0
        n, m = self.n, self.m
        if np.any(self.lower > self.upper + FEASIBILITY_TOL):
            return LpResult(status=SolveStatus.INFEASIBLE)
        self.A[:, n + m :] = np.eye(m)
        self.status[:] = AT_LOWER
        self.x[:] = 0.0
        for j in range(n + m):
            self._place_nonbasic(j)
        residual = self.b - self.A[:, :n] @ self.x[:n]
        phase_one = np.zeros_like(self.cost)
        for i in range(m):
            slack, artificial = n + i, n + m + i
            r = residual[i]
            if self.lower[slack] - FEASIBILITY_TOL <= r <= self.upper[slack] + FEASIBILITY_TOL:
                self.basis[i] = slack
                self.status[slack] = BASIC
                self.x[slack] = r
                self.status[artificial] = AT_LOWER
                self.x[artificial] = 0.0
            else:
                sigma = 1.0 if r > 0 else -1.0
                self.A[i, artificial] = sigma
                self.basis[i] = artificial
                self.status[artificial] = BASIC
                self.upper[artificial] = math.inf
                self.x[artificial] = abs(r)
                phase_one[artificial] = 1.0
        self._refactor()

        if phase_one.any():
            outcome = self._primal(phase_one)
            if outcome == "iteration_limit":
                return LpResult(status=SolveStatus.STALLED, iterations=self.iterations)
            if float(phase_one @ self.x) > FEASIBILITY_TOL * max(1.0, float(np.abs(self.b).max(initial=0.0))):
                logger.debug(f"Phase 1 ended with artificial sum {float(phase_one @ self.x):.3e}")
                return LpResult(status=SolveStatus.INFEASIBLE, iterations=self.iterations)
        self.upper[n + m :] = 0.0
        art = np.arange(n + m, n + 2 * m)
        self.x[art[self.status[art] != BASIC]] = 0.0
        return self._finish(self._primal(self.cost))

    def snapshot(self):
        return BasisSnapshot(basis=self.basis.copy(), status=self.status.copy(), x=self.x.copy())

    def resolve(self, lower, upper, warm: BasisSnapshot):
        """Re-optimises from a dual-feasible basis after structural bound changes.

        Falls back to a cold solve when the warm basis is not dual feasible or
        the dual iterations stall.
        """
        self._set_structural_bounds(lower, upper)
        self.iterations = 0
        if np.any(self.lower > self.upper + FEASIBILITY_TOL):
            return LpResult(status=SolveStatus.INFEASIBLE)
        self.basis = warm.basis.copy()
        self.status = warm.status.copy()
        self.x = warm.x.copy()
        for j in np.flatnonzero(self.status != BASIC):
            self._place_nonbasic(int(j))
        self._refactor()
        _, d = self._reduced_costs(self.cost)
        movable = self.upper > self.lower
        dual_infeasible = (
            ((self.status == AT_LOWER) & movable & (d < -OPT_TOL))
            | ((self.status == AT_UPPER) & movable & (d > OPT_TOL))
            | ((self.status == FREE) & (np.abs(d) > OPT_TOL))
        )
        if dual_infeasible.any():
            logger.debug("Warm basis is not dual feasible, cold start")
            return self.solve(lower, upper)
        outcome = self._dual()
        if outcome == "infeasible":
            return LpResult(status=SolveStatus.INFEASIBLE, iterations=self.iterations)
        if outcome == "iteration_limit":
            logger.debug("Dual simplex hit the iteration cap, cold start")
            return self.solve(lower, upper)
        return self._finish(self._primal(self.cost))

    def _finish(self, outcome):
        if outcome == "unbounded":
            return LpResult(status=SolveStatus.UNBOUNDED, iterations=self.iterations)
        if outcome == "iteration_limit":
            return LpResult(status=SolveStatus.STALLED, iterations=self.iterations)
        self._refactor()
        y, d = self._reduced_costs(self.cost)
        x = self.x[: self.n].copy()
        return LpResult(
            status=SolveStatus.OPTIMAL,
            x=x,
            objective=float(self.cost[: self.n] @ x),
            duals=y,
            reduced_costs=d[: self.n],
            iterations=self.iterations,
        )


def solve_lp(problem: MilpProblem) -> MilpSolution:
    """Solves the continuous relaxation; binary columns are treated as [0, 1]."""
    problem.validate()
    result = BoundedSimplex(problem).solve()
    logger.debug(f"LP relaxation finished: {result.status.value} after {result.iterations} iterations")
    return MilpSolution(
        status=result.status,
        x=result.x,
        objective_value=result.objective,
        iterations=result.iterations,
        best_bound=result.objective,
        duals=result.duals,
        reduced_costs=result.reduced_costs,
    )
