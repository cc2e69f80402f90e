from datetime import datetime, timedelta

import numpy as np

from pv_resiliency.controllers import StepDiagnostics
from pv_resiliency.metrics import RunTrace
from pv_resiliency.milp.validation import enumerate_binaries, random_milp  # noqa: F401
from pv_resiliency.plant import ControlCommand, PlantState, StepAccounting
from pv_resiliency.weather import ExogenousTrace

START = datetime(2017, 9, 10)


def constant_trace(n_steps, ghi=0.0, temp=27.0, demand=0.0, dt_hours=1.0 / 6.0, start=START):
    return ExogenousTrace(
        dt_hours=dt_hours,
        ghi=np.full(n_steps, float(ghi)),
        ambient_temp=np.full(n_steps, float(temp)),
        secondary_demand=np.full(n_steps, float(demand)),
        start=start,
    )


def accounting(e_s_desired=0.0, e_s_served=0.0, t_house=27.0):
    return StepAccounting(
        e_pv_avail=0.0,
        e_pv_used=0.0,
        e_hl=0.0,
        e_fr=0.0,
        e_s_desired=e_s_desired,
        e_s_served=e_s_served,
        e_c=0.0,
        e_dc=0.0,
        shed_secondary=e_s_served < e_s_desired,
        shed_fridge=False,
        compressor_run=False,
        t_house=t_house,
    )


def hand_trace(t_fr_values, desired=None, served=None, dt_hours=1.0 / 6.0, commands=None, diagnostics=None, controller="test"):
    """RunTrace built directly from per-step values, no simulation involved."""
    n = len(t_fr_values)
    desired = desired if desired is not None else [0.0] * n
    served = served if served is not None else desired
    trace = RunTrace(dt_hours=dt_hours, controller=controller)
    for k in range(n):
        state = PlantState(e_bat=5400.0, t_fr=float(t_fr_values[k]), compressor_on=False, house_state=(27.0,), step=k + 1)
        command = commands[k] if commands else ControlCommand()
        diag = diagnostics[k] if diagnostics else StepDiagnostics()
        trace.append(START + timedelta(hours=k * dt_hours), state, command, accounting(desired[k], served[k]), diag)
    return trace
