import logging
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from pv_resiliency.errors import ConfigurationError
from pv_resiliency.metrics import daily_fast_charge_hours
from pv_resiliency.milp import MilpProblem, Sense, SolverLimits, SolveStatus, solve_milp
from pv_resiliency.milp.validation import validate_solver
from pv_resiliency.processor.processor import Processor
from pv_resiliency.scenario import ScenarioConfig, generate_profiles, parse_start, run_scenario
from pv_resiliency.sweeps import (
    FAST_CHARGE_BUDGETS,
    HORIZONS_HOURS,
    HOUSE_MODELS,
    PRESET_LABELS,
    compare_house_models,
    horizon_steps,
    size_crossover,
    sweep_fast_charge,
    sweep_horizon,
    sweep_sizes,
)
from pv_resiliency.weather import ForecastMode

logger = logging.getLogger(__name__)

SCENARIO_ARGUMENTS = (
    "controller",
    "size",
    "start",
    "duration_days",
    "house_model",
    "forecast_mode",
    "e_bat_initial",
    "t_fr_initial",
    "weather_file",
    "horizon_hours",
    "fast_charge_budget_hours",
)


def json_safe(value):
    """Replaces NaN/inf with None and numpy scalars with Python ones, recursively."""
    if isinstance(value, dict):
        return {key: json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class SimulationProcessor(Processor):
    def __init__(self, config):
        self.config = config
        self.base = ScenarioConfig.from_dict(config)

    def describe(self):
        return {
            "controller": self.base.controller,
            "duration_days": self.base.duration_days,
            "dt_hours": self.base.dt_hours,
            "horizon_steps": self.base.mpc.n_steps,
            "solver_time_limit": self.base.solver.time_limit,
        }

    def scenario(self, **arguments):
        """Base scenario with the tool arguments applied."""
        unknown = set(arguments) - set(SCENARIO_ARGUMENTS)
        if unknown:
            raise ConfigurationError(f"Unknown scenario arguments: {sorted(unknown)}")
        changes = {key: value for key, value in arguments.items() if value is not None}
        cfg = self.base
        if "start" in changes:
            changes["start"] = parse_start(changes["start"])
        if "forecast_mode" in changes:
            changes["forecast_mode"] = ForecastMode(changes["forecast_mode"])
        if "weather_file" in changes:
            changes["weather_files"] = (changes.pop("weather_file"),)
        if "horizon_hours" in changes:
            n = horizon_steps(float(changes.pop("horizon_hours")), cfg.dt_hours)
            changes["mpc"] = replace(cfg.mpc, n_steps=n)
            changes["rule_based"] = replace(cfg.rule_based, n_steps=n)
        if "fast_charge_budget_hours" in changes:
            budget = float(changes.pop("fast_charge_budget_hours"))
            changes["rule_based"] = replace(changes.get("rule_based", cfg.rule_based), fast_charge_budget_hours=budget)
        if "duration_days" in changes:
            changes["duration_days"] = float(changes["duration_days"])
        return cfg.with_overrides(**changes)

    def self_test(self):
        """Solves a knapsack-sized MILP and runs one simulated hour of the baseline controller."""
        problem = MilpProblem()
        a = problem.add_variable(0, 1, cost=-5.0, binary=True, name="a")
        b = problem.add_variable(0, 1, cost=-4.0, binary=True, name="b")
        c = problem.add_variable(0, 1, cost=-3.0, binary=True, name="c")
        problem.add_constraint({a: 2.0, b: 3.0, c: 1.0}, Sense.LE, 4.0)
        solution = solve_milp(problem)
        if solution.status != SolveStatus.OPTIMAL or abs(solution.objective_value + 8.0) > 1e-9:
            raise RuntimeError(f"Solver self test failed: {solution.status.value} {solution.objective_value}")
        trace, report = run_scenario(self.scenario(controller="baseline", duration_days=1.0 / 24.0))
        logger.info(f"Self test passed: knapsack optimum {solution.objective_value}, {len(trace)} baseline steps")
        return True

    def run_scenario(self, include_trace=False, **arguments):
        cfg = self.scenario(**arguments)
        trace, report = run_scenario(cfg)
        result = {"report": report.to_dict(), "steps": len(trace)}
        if cfg.controller == "rule_based":
            result["daily_fast_charge_hours"] = {day.isoformat(): hours for day, hours in daily_fast_charge_hours(trace).items()}
        if include_trace:
            result["trace"] = trace.to_frame().to_dict(orient="records")
        return json_safe(result)

    def sweep_sizes(self, presets=PRESET_LABELS, controllers=None, workers=1, **arguments):
        base = self.scenario(**arguments)
        rows = sweep_sizes(base, presets=tuple(presets), controllers=tuple(controllers or ("mpc", "baseline", "rule_based")), workers=workers)
        result = {"rows": rows}
        try:
            result["crossover"] = size_crossover(rows)
        except ConfigurationError as e:
            logger.warning(f"No size crossover: {e}")
            result["crossover"] = None
        return json_safe(result)

    def sweep_horizon(self, horizons_hours=HORIZONS_HOURS, controllers=None, workers=1, **arguments):
        base = self.scenario(**arguments)
        rows = sweep_horizon(base, horizons_hours=tuple(horizons_hours), controllers=tuple(controllers or ("mpc", "rule_based")), workers=workers)
        return json_safe({"rows": rows})

    def sweep_fast_charge(self, budgets=FAST_CHARGE_BUDGETS, workers=1, **arguments):
        rows = sweep_fast_charge(self.scenario(**arguments), budgets=tuple(budgets), workers=workers)
        return json_safe({"rows": rows})

    def compare_house_models(self, models=HOUSE_MODELS, workers=1, **arguments):
        rows = compare_house_models(self.scenario(**arguments), models=tuple(models), workers=workers)
        return json_safe({"rows": rows})

    def validate_solver(self, n_milp=500, n_lp=200, seed=0, max_binary=10):
        summary, failures = validate_solver(n_milp=int(n_milp), n_lp=int(n_lp), seed=int(seed), max_binary=int(max_binary))
        return json_safe({"summary": summary, "failures": failures})

    def gen_profile(self, output_dir=None, n_days=None, **arguments):
        cfg = self.scenario(**arguments)
        directory = Path(output_dir or cfg.output_dir) / "profiles"
        return generate_profiles(cfg, directory, n_days=n_days)

    def solve_milp(self, problem, node_limit=None, time_limit=None):
        limits = self.base.solver
        if node_limit is not None or time_limit is not None:
            limits = SolverLimits(node_limit=int(node_limit or limits.node_limit), time_limit=float(time_limit or limits.time_limit))
        milp = MilpProblem.from_dict(problem)
        solution = solve_milp(milp, limits)
        result = solution.to_dict()
        if solution.x is not None:
            result["values"] = dict(zip(milp.names, (float(v) for v in solution.x)))
        return json_safe(result)
