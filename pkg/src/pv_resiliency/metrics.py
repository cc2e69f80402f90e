import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import pandas as pd

from pv_resiliency.errors import EmptyTrace, NoSecondaryDemand
from pv_resiliency.milp.problem import SolveStatus
from pv_resiliency.plant.system import SystemConfig

logger = logging.getLogger(__name__)

PRM_TOLERANCE_C = 2.0

TRACE_COLUMNS = [
    "step",
    "timestamp",
    "t_fr",
    "e_bat",
    "u_fr",
    "u_s",
    "c",
    "d",
    "x_bat",
    "compressor_run",
    "e_pv_avail",
    "e_pv_used",
    "e_hl",
    "e_c",
    "e_dc",
    "e_s_desired",
    "e_s_served",
    "shed_secondary",
    "shed_fridge",
    "t_house",
    "solver_status",
    "nodes",
    "objective",
    "gamma",
    "fallback",
]


@dataclass
class RunTrace:
    """Per-step record of a closed-loop run; ``states`` hold the end-of-step plant state."""

    dt_hours: float
    controller: str = ""
    timestamps: list = field(default_factory=list)
    states: list = field(default_factory=list)
    commands: list = field(default_factory=list)
    accounting: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def append(self, timestamp, state, command, accounting, diagnostics):
        self.timestamps.append(timestamp)
        self.states.append(state)
        self.commands.append(command)
        self.accounting.append(accounting)
        self.diagnostics.append(diagnostics)

    def __len__(self):
        return len(self.states)

    @property
    def t_sim_hours(self):
        return len(self) * self.dt_hours

    def to_frame(self, include_timing=False):
        rows = []
        for k, (when, state, cmd, acc, diag) in enumerate(zip(self.timestamps, self.states, self.commands, self.accounting, self.diagnostics)):
            row = {
                "step": k,
                "timestamp": when.strftime("%Y-%m-%dT%H:%M"),
                "t_fr": state.t_fr,
                "e_bat": state.e_bat,
                "u_fr": cmd.u_fr,
                "u_s": cmd.u_s,
                "c": cmd.c,
                "d": cmd.d,
                "x_bat": cmd.x_bat,
                "compressor_run": int(acc.compressor_run),
                "e_pv_avail": acc.e_pv_avail,
                "e_pv_used": acc.e_pv_used,
                "e_hl": acc.e_hl,
                "e_c": acc.e_c,
                "e_dc": acc.e_dc,
                "e_s_desired": acc.e_s_desired,
                "e_s_served": acc.e_s_served,
                "shed_secondary": int(acc.shed_secondary),
                "shed_fridge": int(acc.shed_fridge),
                "t_house": acc.t_house,
                "solver_status": diag.solver_status,
                "nodes": diag.nodes,
                "objective": diag.objective,
                "gamma": diag.gamma,
                "fallback": int(diag.fallback),
            }
            if include_timing:
                row["solve_time"] = diag.solve_time
            rows.append(row)
        columns = TRACE_COLUMNS + (["solve_time"] if include_timing else [])
        return pd.DataFrame(rows, columns=columns)


@dataclass
class ResiliencyReport:
    controller: str
    days: float
    prm: float
    srm: float
    violation_hours: float
    unserved_secondary_wh: float
    fast_charge_hours_used: float
    solver_success_pct: float
    avg_solve_time: float
    energy_pv_used_wh: float
    energy_pv_curtailed_wh: float
    stalled_steps: int
    fallback_steps: int
    forecast_fallback_steps: int = 0

    def to_dict(self):
        return asdict(self)


def _require_steps(trace: RunTrace):
    if len(trace) == 0:
        raise EmptyTrace("Run trace has no steps")


def violation_hours(trace: RunTrace, system: SystemConfig):
    threshold = system.t_fr_max + PRM_TOLERANCE_C
    return sum(trace.dt_hours for state in trace.states if state.t_fr > threshold)


def compute_prm(trace: RunTrace, system: SystemConfig):
    """Hours per day the fridge stays at or below its upper limit plus the 2 degC band."""
    _require_steps(trace)
    return 24.0 * (1.0 - violation_hours(trace, system) / trace.t_sim_hours)


def compute_srm(trace: RunTrace):
    """Percent of the steps with secondary demand that were fully served."""
    _require_steps(trace)
    wanted = served = 0.0
    for acc in trace.accounting:
        if acc.e_s_desired > 0:
            wanted += trace.dt_hours
            if acc.e_s_served == acc.e_s_desired:
                served += trace.dt_hours
    if wanted == 0:
        raise NoSecondaryDemand("No step of the trace asked for secondary load")
    return 100.0 * served / wanted


def _step_succeeded(diag):
    # steps without a solver status come from rule controllers, or from a controller that raised
    if diag.solver_status:
        return diag.solver_status == SolveStatus.OPTIMAL.value
    return not diag.fallback


def summarize(trace: RunTrace, system: SystemConfig, forecast_fallback_steps=0) -> ResiliencyReport:
    _require_steps(trace)
    try:
        srm = compute_srm(trace)
    except NoSecondaryDemand:
        logger.warning("Trace has no secondary demand; SRM reported as 100")
        srm = 100.0
    solved = [diag for diag in trace.diagnostics if diag.solver_status]
    success = 100.0 * sum(_step_succeeded(diag) for diag in trace.diagnostics) / len(trace)
    avg_time = sum(diag.solve_time for diag in solved) / len(solved) if solved else 0.0
    return ResiliencyReport(
        controller=trace.controller,
        days=trace.t_sim_hours / 24.0,
        prm=compute_prm(trace, system),
        srm=srm,
        violation_hours=violation_hours(trace, system),
        unserved_secondary_wh=sum(acc.e_s_desired - acc.e_s_served for acc in trace.accounting),
        fast_charge_hours_used=sum(trace.dt_hours for cmd in trace.commands if cmd.x_bat == 2),
        solver_success_pct=success,
        avg_solve_time=avg_time,
        energy_pv_used_wh=sum(acc.e_pv_used for acc in trace.accounting),
        energy_pv_curtailed_wh=sum(acc.e_pv_avail - acc.e_pv_used for acc in trace.accounting),
        stalled_steps=sum(diag.solver_status in (SolveStatus.STALLED.value, SolveStatus.NODE_LIMIT.value) for diag in solved),
        fallback_steps=sum(bool(diag.fallback) for diag in trace.diagnostics),
        forecast_fallback_steps=forecast_fallback_steps,
    )


def report_row(report: ResiliencyReport, **extra):
    row = dict(extra)
    row.update(report.to_dict())
    return row


def write_report_json(report: ResiliencyReport, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {key: (None if isinstance(value, float) and not math.isfinite(value) else value) for key, value in report.to_dict().items()}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_report_text(report: ResiliencyReport, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={value:.6g}" if isinstance(value, float) else f"{key}={value}" for key, value in report.to_dict().items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def daily_fast_charge_hours(trace: RunTrace):
    """Hours of fast charging per calendar day of the run."""
    usage = {}
    for when, cmd in zip(trace.timestamps, trace.commands):
        usage.setdefault(when.date(), 0.0)
        if cmd.x_bat == 2:
            usage[when.date()] += trace.dt_hours
    return usage
