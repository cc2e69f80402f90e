"""Receding-horizon MILP controller.

Each step the horizon problem is rebuilt from the measured battery energy and
fridge temperature, solved with the embedded branch and bound, and only the
first step of the solution is applied.
"""

import logging
import math
from dataclasses import dataclass, fields

import numpy as np

from pv_resiliency.config import check_keys
from pv_resiliency.controllers.base import ControlContext, Controller, StepDiagnostics, predict_house_temp
from pv_resiliency.errors import ConfigurationError
from pv_resiliency.milp import MilpProblem, Sense, SolverLimits, SolveStatus, solve_milp, warm_hint, write_lp
from pv_resiliency.plant.simulator import ControlCommand
from pv_resiliency.plant.system import FridgeDiscretization, SystemConfig

logger = logging.getLogger(__name__)

GAMMA_SNAP = 1e-9


@dataclass(frozen=True)
class MpcConfig:
    n_steps: int = 18
    dt_hours: float = 1.0 / 6.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    lambda4: float = 10.0
    gamma_min: float = -1.0
    gamma_max: float = 2.0
    eta_con: float = 1.0
    house_pred: str = "offset"
    e_bat_cost_unit_wh: float = None

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be >= 1, got {self.n_steps}")
        if not self.gamma_min < 0 < 1 < self.gamma_max:
            raise ConfigurationError(f"Need gamma_min < 0 < 1 < gamma_max, got [{self.gamma_min}, {self.gamma_max}]")
        if min(self.lambda1, self.lambda2, self.lambda3, self.lambda4) < 0:
            raise ConfigurationError("Objective weights must be >= 0")
        if self.house_pred not in ("offset", "constant"):
            raise ConfigurationError(f"house_pred must be 'offset' or 'constant', got '{self.house_pred}'")
        if self.e_bat_cost_unit_wh is not None and not self.e_bat_cost_unit_wh > 0:
            raise ConfigurationError("e_bat_cost_unit_wh must be > 0")

    @classmethod
    def from_dict(cls, data, dt_hours=None):
        data = dict(data or {})
        check_keys(data, [f.name for f in fields(cls)], "mpc")
        if dt_hours is not None:
            data["dt_hours"] = dt_hours
        return cls(**data)


@dataclass(frozen=True)
class MpcDecisionLayout:
    """Column indices per role; states carry N+1 entries, everything else N."""

    n_steps: int
    t_fr: tuple
    e_bat: tuple
    gamma: tuple
    u_fr: tuple
    u_s: tuple
    g: tuple
    zeta: tuple

    def roles(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "n_steps"}

    def shift(self, x):
        """Previous solution moved one step earlier with the last step repeated."""
        x = np.asarray(x, dtype=float)
        shifted = np.zeros_like(x)
        for columns in self.roles().values():
            values = x[list(columns)]
            shifted[list(columns)] = np.append(values[1:], values[-1])
        return shifted


def build_problem(e_bat, t_fr, e_pv, e_s, house_pred, cfg: MpcConfig, system: SystemConfig, disc: FridgeDiscretization):
    """Horizon MILP for the measured (e_bat, t_fr) and per-step forecasts of length N."""
    n = cfg.n_steps
    for label, series in (("e_pv", e_pv), ("e_s", e_s), ("house_pred", house_pred)):
        if len(series) < n:
            raise ConfigurationError(f"Forecast '{label}' has {len(series)} steps, horizon needs {n}")
    e_bat_c = system.e_bat_c_max
    unit = cfg.e_bat_cost_unit_wh or e_bat_c
    e_fr = system.fridge_energy(cfg.dt_hours)
    p = MilpProblem()

    t_cols = [p.add_variable(-math.inf, math.inf, name="t_fr_0")]
    e_cols = [p.add_variable(-math.inf, math.inf, name="e_bat_0")]
    for k in range(1, n + 1):
        t_cols.append(p.add_variable(system.t_fr_min, math.inf, name=f"t_fr_{k}"))
        # the pinned E_bat(0) is a constant, so the charge reward runs over E_bat(1..N)
        e_cols.append(p.add_variable(system.e_bat_min, system.e_bat_max, cost=-cfg.lambda2 / unit, name=f"e_bat_{k}"))
    gamma_cols, u_fr_cols, u_s_cols, g_cols, zeta_cols = [], [], [], [], []
    for k in range(n):
        weight = n - k
        gamma_cols.append(p.add_variable(cfg.gamma_min, cfg.gamma_max, cost=cfg.lambda3, name=f"gamma_{k}"))
        u_fr_cols.append(p.add_variable(0.0, 1.0, binary=True, name=f"u_fr_{k}"))
        u_s_hi = 1.0 if e_s[k] > 0 else 0.0
        u_s_cols.append(p.add_variable(0.0, u_s_hi, cost=-cfg.lambda4 * weight, binary=True, name=f"u_s_{k}"))
        g_cols.append(p.add_variable(0.0, max(0.0, float(e_pv[k])), name=f"g_{k}"))
        zeta_cols.append(p.add_variable(0.0, math.inf, cost=cfg.lambda1 * weight, name=f"zeta_{k}"))

    p.add_constraint({t_cols[0]: 1.0}, Sense.EQ, t_fr, name="init_t_fr")
    p.add_constraint({e_cols[0]: 1.0}, Sense.EQ, e_bat, name="init_e_bat")
    for k in range(n):
        p.add_constraint(
            {t_cols[k + 1]: 1.0, t_cols[k]: -disc.a, u_fr_cols[k]: -disc.b * disc.q_fr},
            Sense.EQ,
            disc.d * float(house_pred[k]),
            name=f"fridge_{k}",
        )
        p.add_constraint({e_cols[k + 1]: 1.0, e_cols[k]: -1.0, gamma_cols[k]: -cfg.eta_con * e_bat_c}, Sense.EQ, 0.0, name=f"battery_{k}")
        p.add_constraint(
            {u_fr_cols[k]: e_fr, gamma_cols[k]: e_bat_c, u_s_cols[k]: float(e_s[k]), g_cols[k]: -1.0},
            Sense.EQ,
            0.0,
            name=f"balance_{k}",
        )
        p.add_constraint({t_cols[k + 1]: 1.0, zeta_cols[k]: -1.0}, Sense.LE, system.t_fr_max, name=f"t_max_{k}")

    layout = MpcDecisionLayout(
        n_steps=n,
        t_fr=tuple(t_cols),
        e_bat=tuple(e_cols),
        gamma=tuple(gamma_cols),
        u_fr=tuple(u_fr_cols),
        u_s=tuple(u_s_cols),
        g=tuple(g_cols),
        zeta=tuple(zeta_cols),
    )
    return p, layout


def idle_point(problem: MilpProblem, layout: MpcDecisionLayout, e_bat, t_fr, house_pred, disc: FridgeDiscretization, t_fr_max):
    """Gamma = 0, all loads off, no PV drawn; the slack absorbs any temperature excess."""
    x = np.zeros(problem.num_vars)
    temp = t_fr
    x[layout.t_fr[0]] = temp
    for k in range(layout.n_steps):
        temp = disc.next_temp(temp, False, house_pred[k])
        x[layout.t_fr[k + 1]] = temp
        x[layout.zeta[k]] = max(0.0, temp - t_fr_max)
    x[list(layout.e_bat)] = e_bat
    return x


def map_gamma(gamma):
    c = 1 if gamma > 0 else 0
    d = 1 if gamma < 0 else 0
    if 0 < gamma <= 1:
        x_bat = 1
    elif 1 < gamma <= 2:
        x_bat = 2
    else:
        x_bat = 0
    return c, d, x_bat


def _snap(value):
    nearest = round(value)
    return float(nearest) if abs(value - nearest) <= GAMMA_SNAP else float(value)


class MpcController(Controller):
    name = "mpc"

    def __init__(self, cfg: MpcConfig, system: SystemConfig, disc: FridgeDiscretization, limits: SolverLimits = None, dump_lp_dir=None):
        self.cfg = cfg
        self.system = system
        self.disc = disc
        self.limits = limits or SolverLimits()
        self.dump_lp_dir = dump_lp_dir
        self._previous = None
        self._layout = None

    @property
    def horizon_steps(self):
        return self.cfg.n_steps

    def control(self, ctx: ControlContext):
        n = self.cfg.n_steps
        forecaster = ctx.forecaster
        e_pv = forecaster.pv_energy(ctx.k, n)
        e_s = forecaster.secondary(ctx.k, n)
        house_pred = predict_house_temp(ctx.t_house_meas, forecaster.house_history(ctx.k, n), n, self.cfg.house_pred)
        problem, layout = build_problem(ctx.state.e_bat, ctx.state.t_fr, e_pv, e_s, house_pred, self.cfg, self.system, self.disc)
        if self.dump_lp_dir is not None:
            write_lp(problem, f"{self.dump_lp_dir}/step_{ctx.k:05d}.lp")

        incumbent = None
        if self._previous is not None and self._layout == layout:
            incumbent = warm_hint(problem, layout.shift(self._previous))
        solution = solve_milp(problem, self.limits, incumbent)

        if solution.x is None:
            logger.warning(f"Step {ctx.k}: solver returned {solution.status.value} without a solution, applying safe command")
            self._previous = None
            diagnostics = StepDiagnostics(
                solver_status=solution.status.value,
                nodes=solution.nodes_explored,
                solve_time=solution.solve_time,
                fallback=True,
            )
            return self.safe_command(), diagnostics

        if solution.status != SolveStatus.OPTIMAL:
            logger.warning(f"Step {ctx.k}: solver {solution.status.value} after {solution.nodes_explored} nodes, using incumbent")
        x = solution.x
        self._previous = x
        self._layout = layout
        gamma = _snap(x[layout.gamma[0]])
        c, d, x_bat = map_gamma(gamma)
        command = ControlCommand(u_fr=int(round(x[layout.u_fr[0]])), u_s=int(round(x[layout.u_s[0]])), c=c, d=d, x_bat=x_bat)
        diagnostics = StepDiagnostics(
            solver_status=solution.status.value,
            nodes=solution.nodes_explored,
            solve_time=solution.solve_time,
            objective=solution.objective_value,
            gamma=gamma,
        )
        logger.debug(f"Step {ctx.k}: gamma={gamma:.4f} u_fr={command.u_fr} u_s={command.u_s} nodes={solution.nodes_explored}")
        return command, diagnostics
