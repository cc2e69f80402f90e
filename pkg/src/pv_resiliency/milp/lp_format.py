import logging
import math
import re
from pathlib import Path

from pv_resiliency.milp.problem import MilpProblem, Sense

logger = logging.getLogger(__name__)

_NAME_RE = re.compile(r"[^A-Za-z0-9_.]")


def _clean(name):
    return _NAME_RE.sub("_", name)


def _fmt(value):
    return f"{value:.12g}"


def _linear(coefs, names):
    if not coefs:
        return "0 " + names[0] if names else "0"
    terms = []
    for j, value in sorted(coefs.items()):
        sign = "-" if value < 0 else "+"
        terms.append(f"{sign} {_fmt(abs(value))} {names[j]}")
    text = " ".join(terms)
    return text[2:] if text.startswith("+ ") else text


def format_lp(problem: MilpProblem) -> str:
    """Renders the problem as CPLEX LP text readable by common external solvers."""
    names = [_clean(name) for name in problem.names]
    lines = ["\\ generated by pv_resiliency", "Minimize", f" obj: {_linear(problem.objective, names)}", "Subject To"]
    for row in problem.constraints:
        operator = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}[row.sense]
        lines.append(f" {_clean(row.name)}: {_linear(row.coefs, names)} {operator} {_fmt(row.rhs)}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        lo, hi = problem.lower[j], problem.upper[j]
        if problem.binary[j] and lo == 0.0 and hi == 1.0:
            continue
        if lo == hi:
            lines.append(f" {name} = {_fmt(lo)}")
        elif math.isinf(lo) and math.isinf(hi):
            lines.append(f" {name} free")
        else:
            lo_text = "-inf" if math.isinf(lo) else _fmt(lo)
            hi_text = "+inf" if math.isinf(hi) else _fmt(hi)
            lines.append(f" {lo_text} <= {name} <= {hi_text}")
    binaries = [names[j] for j in range(problem.num_vars) if problem.binary[j]]
    if binaries:
        lines.append("Binaries")
        for start in range(0, len(binaries), 8):
            lines.append(" " + " ".join(binaries[start : start + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(problem: MilpProblem, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_lp(problem), encoding="utf-8")
    logger.debug(f"Wrote LP dump to {path}")
    return path
