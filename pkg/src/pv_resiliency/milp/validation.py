"""Random instances and reference checks for the embedded solver."""

import itertools
import logging
import math
import time

import numpy as np
from scipy.optimize import linprog

from pv_resiliency.milp.branch_and_bound import solve_milp
from pv_resiliency.milp.problem import MilpProblem, Sense, SolverLimits, SolveStatus
from pv_resiliency.milp.simplex import solve_lp

logger = logging.getLogger(__name__)

AGREEMENT_TOL = 1e-6


def random_problem(rng, n_binary, n_continuous, n_rows):
    """Feasible, bounded instance built around a random interior point."""
    p = MilpProblem()
    point = []
    for j in range(n_binary):
        p.add_variable(0.0, 1.0, cost=float(rng.uniform(-10, 10)), binary=True, name=f"b{j}")
        point.append(float(rng.integers(0, 2)))
    for j in range(n_continuous):
        lo = float(rng.uniform(-5, 0))
        hi = lo + float(rng.uniform(1, 10))
        p.add_variable(lo, hi, cost=float(rng.uniform(-10, 10)), name=f"x{j}")
        point.append(float(rng.uniform(lo, hi)))
    point = np.array(point)
    n = n_binary + n_continuous
    for i in range(n_rows):
        coefs = {j: float(rng.integers(-5, 6)) for j in range(n) if rng.random() < 0.6}
        coefs = {j: v for j, v in coefs.items() if v != 0.0} or {int(rng.integers(0, n)): 1.0}
        activity = sum(v * point[j] for j, v in coefs.items())
        roll = rng.random()
        if roll < 0.45:
            p.add_constraint(coefs, Sense.LE, activity + float(rng.uniform(0, 3)), name=f"r{i}")
        elif roll < 0.9:
            p.add_constraint(coefs, Sense.GE, activity - float(rng.uniform(0, 3)), name=f"r{i}")
        else:
            p.add_constraint(coefs, Sense.EQ, activity, name=f"r{i}")
    return p


def random_milp(rng, max_binary=10, max_continuous=20, max_rows=15):
    n_binary = int(rng.integers(1, max_binary + 1))
    n_continuous = int(rng.integers(0, max_continuous + 1))
    return random_problem(rng, n_binary, n_continuous, int(rng.integers(1, max_rows + 1)))


def random_lp(rng, max_continuous=20, max_rows=15):
    return random_problem(rng, 0, int(rng.integers(1, max_continuous + 1)), int(rng.integers(1, max_rows + 1)))


def reference_lp(problem: MilpProblem, lower=None, upper=None):
    """Optimal objective from HiGHS, or None when the LP is infeasible."""
    c, A, senses, b, lo, hi = problem.dense()
    lo = lo if lower is None else lower
    hi = hi if upper is None else upper
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for row, sense, rhs in zip(A, senses, b):
        if sense == Sense.LE:
            ub_rows.append(row)
            ub_rhs.append(rhs)
        elif sense == Sense.GE:
            ub_rows.append(-row)
            ub_rhs.append(-rhs)
        else:
            eq_rows.append(row)
            eq_rhs.append(rhs)
    bounds = [(None if math.isinf(l) else l, None if math.isinf(h) else h) for l, h in zip(lo, hi)]  # noqa: E741
    result = linprog(
        c,
        A_ub=np.array(ub_rows) if ub_rows else None,
        b_ub=np.array(ub_rhs) if ub_rhs else None,
        A_eq=np.array(eq_rows) if eq_rows else None,
        b_eq=np.array(eq_rhs) if eq_rhs else None,
        bounds=bounds,
        method="highs",
    )
    return float(result.fun) if result.status == 0 else None


def enumerate_binaries(problem: MilpProblem):
    """Brute-force optimum: one reference LP per assignment of the binary columns."""
    binaries = problem.binary_indices()
    _, _, _, _, lo, hi = problem.dense()
    best = None
    for assignment in itertools.product((0.0, 1.0), repeat=len(binaries)):
        lower, upper = lo.copy(), hi.copy()
        for j, value in zip(binaries, assignment):
            if not lo[j] <= value <= hi[j]:
                break
            lower[j] = upper[j] = value
        else:
            value = reference_lp(problem, lower, upper)
            if value is not None and (best is None or value < best):
                best = value
    return best


def dual_objective(problem: MilpProblem, duals, reduced_costs):
    """Lagrangian bound b'y + sum_j min(d_j l_j, d_j u_j) for a bounded LP."""
    _, _, _, b, lo, hi = problem.dense()
    total = float(b @ duals)
    for d, l, h in zip(reduced_costs, lo, hi):  # noqa: E741
        if abs(d) > 0:
            total += min(d * l, d * h)
    return total


def _agree(a, b):
    return abs(a - b) <= AGREEMENT_TOL * max(1.0, abs(a), abs(b))


def validate_solver(n_milp=500, n_lp=200, seed=0, max_binary=10, limits: SolverLimits = None):
    """Checks branch and bound against enumeration and LP duals against strong duality.

    Returns a summary dict plus the list of failing instances.
    """
    rng = np.random.default_rng(seed)
    limits = limits or SolverLimits(node_limit=100000, time_limit=60.0)
    started = time.perf_counter()
    failures = []
    solver_time = 0.0
    for i in range(n_milp):
        problem = random_milp(rng, max_binary=max_binary)
        expected = enumerate_binaries(problem)
        solution = solve_milp(problem, limits)
        solver_time += solution.solve_time
        if expected is None:
            ok = solution.status == SolveStatus.INFEASIBLE
        else:
            ok = solution.status == SolveStatus.OPTIMAL and _agree(solution.objective_value, expected)
            ok = ok and problem.is_feasible(solution.x, tol=AGREEMENT_TOL)
        if not ok:
            logger.warning(f"MILP instance {i}: got {solution.status.value} {solution.objective_value}, expected {expected}")
            failures.append({"kind": "milp", "instance": i, "status": solution.status.value, "got": solution.objective_value, "expected": expected})

    for i in range(n_lp):
        problem = random_lp(rng)
        solution = solve_lp(problem)
        expected = reference_lp(problem)
        if solution.status != SolveStatus.OPTIMAL or expected is None:
            ok = expected is None and solution.status == SolveStatus.INFEASIBLE
            dual = math.nan
        else:
            dual = dual_objective(problem, solution.duals, solution.reduced_costs)
            ok = _agree(solution.objective_value, expected) and _agree(solution.objective_value, dual)
        if not ok:
            logger.warning(f"LP instance {i}: primal {solution.objective_value} dual {dual} reference {expected}")
            failures.append({"kind": "lp", "instance": i, "status": solution.status.value, "got": solution.objective_value, "expected": expected})

    elapsed = time.perf_counter() - started
    summary = {
        "milp_instances": n_milp,
        "lp_instances": n_lp,
        "failures": len(failures),
        "seed": seed,
        "elapsed_s": elapsed,
        "solver_time_s": solver_time,
    }
    logger.info(f"Solver validation: {len(failures)} failures over {n_milp} MILPs and {n_lp} LPs in {elapsed:.1f}s")
    return summary, failures
