import logging
import math
from dataclasses import dataclass, fields, replace
from datetime import timedelta

from pv_resiliency.config import check_keys
from pv_resiliency.controllers.base import ControlContext, Controller, StepDiagnostics, predict_house_temp
from pv_resiliency.errors import ConfigurationError, HorizonOutOfRange
from pv_resiliency.plant.house import TraceDriven
from pv_resiliency.plant.simulator import ControlCommand, PlantState, deliverable_energy, step, thermostat
from pv_resiliency.plant.system import FridgeDiscretization, SystemConfig, pv_energy

logger = logging.getLogger(__name__)

MISMATCH_TOL = 1e-9


@dataclass(frozen=True)
class RuleBasedConfig:
    n_steps: int = 18
    fast_charge_budget_hours: float = 5.0
    dt_hours: float = 1.0 / 6.0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.fast_charge_budget_hours < 0:
            raise ConfigurationError(f"fast_charge_budget_hours must be >= 0, got {self.fast_charge_budget_hours}")

    @classmethod
    def from_dict(cls, data, dt_hours=None):
        data = dict(data or {})
        check_keys(data, [f.name for f in fields(cls)], "rule_based")
        if dt_hours is not None:
            data["dt_hours"] = dt_hours
        return cls(**data)

    @property
    def budget_steps(self):
        """Fast-charge steps allowed per calendar day."""
        return int(math.floor(self.fast_charge_budget_hours / self.dt_hours + 1e-9))


@dataclass(frozen=True)
class MismatchReport:
    e_serviced: float
    e_desired: float
    e_secondary_horizon: float = 0.0

    @property
    def e_mis(self):
        return min(0.0, self.e_serviced - self.e_desired)


def _fridge_demand(state: PlantState, system: SystemConfig, dt_hours):
    return system.fridge_energy(dt_hours) if thermostat(state, system) else 0.0


def baseline_step(state: PlantState, e_pv, e_s_desired, system: SystemConfig, dt_hours) -> ControlCommand:
    """All-or-none supply: serve everything that fits, gate the secondary first and then the fridge."""
    supply = e_pv + deliverable_energy(system, state.e_bat)
    e_fr = _fridge_demand(state, system, dt_hours)
    u_fr, u_s = 1, 1 if e_s_desired > 0 else 0
    load = (e_fr + u_s * e_s_desired) / system.eta_inv
    if supply < load and u_s:
        u_s = 0
        load = e_fr / system.eta_inv
    if supply < load:
        u_fr = 0
        load = 0.0
    c = 1 if e_pv > load else 0
    d = 1 if e_pv < load else 0
    return ControlCommand(u_fr=u_fr, u_s=u_s, c=c, d=d, x_bat=c)


def battery_logic(u_fr, u_s, e_pv, e_s_now, state: PlantState, budget_steps_left, system: SystemConfig, dt_hours):  # noqa: ARG001
    """Charge/discharge decision for the served load; fast charge needs surplus above one normal step and budget."""
    e_fr = system.fridge_energy(dt_hours) if u_fr else 0.0
    e_hl = (e_fr + (e_s_now if u_s else 0.0)) / system.eta_inv
    c = 1 if e_pv > e_hl else 0
    d = 1 if e_pv < e_hl else 0
    x_bat = c
    if c and e_pv - e_hl > system.e_bat_c_max and budget_steps_left >= 1:
        x_bat = 2
    return c, d, x_bat


def rulebased_internal_sim(
    state: PlantState,
    e_pv,
    e_s,
    house_pred,
    cfg: RuleBasedConfig,
    system: SystemConfig,
    disc: FridgeDiscretization,
    budget_steps_left,
    when,
):
    """Closed-loop look-ahead of the baseline policy with fast charging over N steps.

    Returns the mismatch between serviced and desired energy and the thermostat
    decision for the current step.
    """
    n = cfg.n_steps
    if min(len(e_pv), len(e_s), len(house_pred)) < n:
        raise HorizonOutOfRange(f"Rule-based look-ahead needs {n} forecast steps")
    house = TraceDriven()
    sim = replace(state, house_state=house.initial_state(house_pred[0]))
    budget = budget_steps_left
    serviced = desired = 0.0
    for k in range(n):
        now = when + timedelta(hours=k * cfg.dt_hours)
        if k > 0 and now.date() != (now - timedelta(hours=cfg.dt_hours)).date():
            budget = cfg.budget_steps
        command = baseline_step(sim, e_pv[k], e_s[k], system, cfg.dt_hours)
        if command.c and budget >= 1:
            running = int(command.u_fr and thermostat(sim, system))
            _, _, x_bat = battery_logic(running, command.u_s, e_pv[k], e_s[k], sim, budget, system, cfg.dt_hours)
            if x_bat == 2:
                command = replace(command, x_bat=2)
                budget -= 1
        desired += _fridge_demand(sim, system, cfg.dt_hours) + float(e_s[k])
        ghi = e_pv[k] / (system.n_pv * system.p_pv_rated * cfg.dt_hours) * system.g_std
        sim, accounting = step(sim, command, ghi, e_s[k], house_pred[k], system, disc, house, cfg.dt_hours)
        serviced += accounting.e_fr + accounting.e_s_served
    report = MismatchReport(e_serviced=serviced, e_desired=desired, e_secondary_horizon=float(sum(e_s[:n])))
    return report, int(thermostat(state, system))


def secondary_logic(report: MismatchReport, e_s_now):
    if e_s_now <= 0:
        return 0
    shortfall = -report.e_mis
    if shortfall <= MISMATCH_TOL:
        return 1
    # the rest of the horizon's secondary energy can absorb the shortfall
    if shortfall <= report.e_secondary_horizon - e_s_now + MISMATCH_TOL:
        return 1
    return 0


class BaselineController(Controller):
    name = "baseline"

    def __init__(self, system: SystemConfig, dt_hours):
        self.system = system
        self.dt_hours = dt_hours

    def control(self, ctx: ControlContext):
        e_pv = pv_energy(self.system, ctx.forecaster.trace.ghi[ctx.k], self.dt_hours)
        e_s = float(ctx.forecaster.trace.secondary_demand[ctx.k])
        return baseline_step(ctx.state, e_pv, e_s, self.system, self.dt_hours), StepDiagnostics()


class RuleBasedController(Controller):
    name = "rule_based"

    def __init__(self, cfg: RuleBasedConfig, system: SystemConfig, disc: FridgeDiscretization, house_pred="offset"):
        self.cfg = cfg
        self.system = system
        self.disc = disc
        self.house_pred = house_pred
        self._budget_day = None
        self._budget_left = cfg.budget_steps

    @property
    def horizon_steps(self):
        return self.cfg.n_steps

    def control(self, ctx: ControlContext):
        if ctx.timestamp.date() != self._budget_day:
            self._budget_day = ctx.timestamp.date()
            self._budget_left = self.cfg.budget_steps
        n = self.cfg.n_steps
        forecaster = ctx.forecaster
        e_pv = forecaster.pv_energy(ctx.k, n)
        e_s = forecaster.secondary(ctx.k, n)
        house_pred = predict_house_temp(ctx.t_house_meas, forecaster.house_history(ctx.k, n), n, self.house_pred)

        report, u_fr = rulebased_internal_sim(
            ctx.state, e_pv, e_s, house_pred, self.cfg, self.system, self.disc, self._budget_left, ctx.timestamp
        )
        u_s = secondary_logic(report, e_s[0])
        c, d, x_bat = battery_logic(u_fr, u_s, e_pv[0], e_s[0], ctx.state, self._budget_left, self.system, self.cfg.dt_hours)
        if x_bat == 2:
            self._budget_left -= 1
        logger.debug(f"Step {ctx.k}: e_mis={report.e_mis:.2f} u_s={u_s} x_bat={x_bat} budget_left={self._budget_left}")
        return ControlCommand(u_fr=u_fr, u_s=u_s, c=c, d=d, x_bat=x_bat), StepDiagnostics()
