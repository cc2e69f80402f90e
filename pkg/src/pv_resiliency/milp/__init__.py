from pv_resiliency.milp.branch_and_bound import Incumbent, solve_milp, warm_hint
from pv_resiliency.milp.lp_format import format_lp, write_lp
from pv_resiliency.milp.problem import MilpProblem, MilpSolution, Sense, SolverLimits, SolveStatus
from pv_resiliency.milp.simplex import solve_lp

__all__ = [
    "Incumbent",
    "MilpProblem",
    "MilpSolution",
    "Sense",
    "SolveStatus",
    "SolverLimits",
    "format_lp",
    "solve_lp",
    "solve_milp",
    "warm_hint",
    "write_lp",
]
