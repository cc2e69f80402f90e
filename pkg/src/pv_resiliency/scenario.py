import logging
import math
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import pandas as pd
from dateutil import parser as dateparser

from pv_resiliency.config import check_keys, load_config
from pv_resiliency.controllers import (
    BaselineController,
    ControlContext,
    Forecaster,
    MpcConfig,
    MpcController,
    RuleBasedConfig,
    RuleBasedController,
    StepDiagnostics,
)
from pv_resiliency.errors import ConfigurationError, InsufficientCoverage, ResiliencyError
from pv_resiliency.metrics import RunTrace, summarize
from pv_resiliency.milp import SolverLimits
from pv_resiliency.plant import ControlCommand, PlantState, SystemConfig, build_house_model, discretize_fridge, step
from pv_resiliency.weather import (
    ColumnSchema,
    ForecastMode,
    build_historical_profile,
    load_historical_profiles,
    parse_weather_csv,
    resample,
    synthetic_historical_profiles,
    synthetic_irma_week,
    write_historical_profiles,
)

logger = logging.getLogger(__name__)

CONTROLLERS = ("mpc", "baseline", "rule_based")
LIGHTS_WINDOW = (18.0, 24.0)
FANS_WINDOW = (21.0, 9.0)


@dataclass(frozen=True)
class SizePreset:
    label: str
    n_pv: int
    battery_units: int

    def apply(self, system: SystemConfig) -> SystemConfig:
        return system.scaled(self.n_pv, self.battery_units)

    def cost_usd(self, system: SystemConfig):
        return self.apply(system).cost_usd


SIZE_PRESETS = {
    "A": SizePreset("A", 3, 2),
    "B": SizePreset("B", 3, 4),
    "C": SizePreset("C", 4, 2),
    "D": SizePreset("D", 4, 4),
    "E": SizePreset("E", 5, 4),
    "F": SizePreset("F", 6, 4),
}


def parse_start(value):
    if isinstance(value, datetime):
        return value
    try:
        return dateparser.parse(str(value)).replace(tzinfo=None)
    except (ValueError, OverflowError) as e:
        raise ConfigurationError(f"Cannot parse start time '{value}': {e}") from e


@dataclass(frozen=True)
class ScenarioConfig:
    start: datetime = datetime(2017, 9, 10)
    duration_days: float = 7.0
    dt_hours: float = 1.0 / 6.0
    controller: str = "mpc"
    system: SystemConfig = field(default_factory=SystemConfig)
    size: str = None
    mpc: MpcConfig = field(default_factory=MpcConfig)
    rule_based: RuleBasedConfig = field(default_factory=RuleBasedConfig)
    solver: SolverLimits = field(default_factory=SolverLimits)
    weather_files: tuple = ()
    weather_schema: ColumnSchema = field(default_factory=ColumnSchema)
    historical_source: str = None
    e_bat_initial: float = None
    t_fr_initial: float = 2.0
    house_model: str = "trace"
    house_params: tuple = ()
    forecast_mode: ForecastMode = ForecastMode.PERFECT
    forecast_seed: int = 0
    forecast_sigma: float = 0.2
    output_dir: str = "output"
    dump_lp_dir: str = None

    def __post_init__(self):
        if not self.duration_days > 0:
            raise ConfigurationError(f"duration_days must be > 0, got {self.duration_days}")
        if not self.dt_hours > 0:
            raise ConfigurationError(f"dt_hours must be > 0, got {self.dt_hours}")
        if self.controller not in CONTROLLERS:
            raise ConfigurationError(f"Unknown controller '{self.controller}' (expected one of {', '.join(CONTROLLERS)})")
        if self.size is not None and self.size not in SIZE_PRESETS:
            raise ConfigurationError(f"Unknown size preset '{self.size}' (expected A-F)")
        if not math.isfinite(self.t_fr_initial):
            raise ConfigurationError("t_fr_initial must be finite")
        system = self.plant_system
        if self.e_bat_initial is not None and not system.e_bat_min <= self.e_bat_initial <= system.e_bat_max:
            raise ConfigurationError(f"e_bat_initial {self.e_bat_initial} outside [{system.e_bat_min}, {system.e_bat_max}]")

    @property
    def plant_system(self) -> SystemConfig:
        return SIZE_PRESETS[self.size].apply(self.system) if self.size else self.system

    @property
    def n_steps(self):
        return int(round(self.duration_days * 24.0 / self.dt_hours))

    def with_overrides(self, **changes):
        """Copy with changed fields; dt_hours changes are pushed into the controller configs."""
        updated = replace(self, **changes)
        if "dt_hours" in changes:
            updated = replace(
                updated,
                mpc=replace(updated.mpc, dt_hours=updated.dt_hours),
                rule_based=replace(updated.rule_based, dt_hours=updated.dt_hours),
            )
        return updated

    @classmethod
    def from_dict(cls, config):
        """Builds a scenario from the sectioned document returned by ``load_config``."""
        scenario = dict(config.get("scenario") or {})
        allowed = [f.name for f in fields(cls)] + ["weather_format"]
        check_keys(scenario, allowed, "scenario")
        dt_hours = float(scenario.pop("dt_hours", 1.0 / 6.0))
        kwargs = {"dt_hours": dt_hours}
        if "start" in scenario:
            kwargs["start"] = parse_start(scenario.pop("start"))
        schema = dict(scenario.pop("weather_schema", None) or {})
        if "weather_format" in scenario:
            schema["format"] = scenario.pop("weather_format")
        kwargs["weather_schema"] = ColumnSchema.from_dict(schema)
        if "weather_files" in scenario:
            files = scenario.pop("weather_files") or ()
            kwargs["weather_files"] = tuple([files] if isinstance(files, str) else files)
        if "house_params" in scenario:
            kwargs["house_params"] = tuple(sorted((scenario.pop("house_params") or {}).items()))
        if "forecast_mode" in scenario:
            kwargs["forecast_mode"] = ForecastMode(scenario.pop("forecast_mode"))
        kwargs.update(scenario)
        system = SystemConfig.from_dict(config.get("system"))
        return cls(
            system=system,
            mpc=MpcConfig.from_dict(config.get("mpc"), dt_hours=dt_hours),
            rule_based=RuleBasedConfig.from_dict(config.get("rule_based"), dt_hours=dt_hours),
            solver=SolverLimits.from_dict(config.get("solver")),
            **kwargs,
        )

    @classmethod
    def load(cls, path=None):
        return cls.from_dict(load_config(path))


def build_secondary_profile(n_days, system: SystemConfig, dt_hours=1.0 / 6.0, start=None):
    """Desired lights+fans energy per step: lights 18:00-24:00, fans 21:00-09:00."""
    for boundary in (*LIGHTS_WINDOW, *FANS_WINDOW):
        steps = boundary / dt_hours
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigurationError(f"dt_hours={dt_hours} does not divide the schedule boundary {boundary}:00")
    start = start or datetime(2017, 9, 10)
    n_steps = int(round(n_days * 24.0 / dt_hours))
    profile = np.zeros(n_steps)
    for k in range(n_steps):
        when = start + timedelta(hours=k * dt_hours)
        hour = when.hour + when.minute / 60.0
        lights_on = LIGHTS_WINDOW[0] <= hour < LIGHTS_WINDOW[1]
        fans_on = hour >= FANS_WINDOW[0] or hour < FANS_WINDOW[1]
        profile[k] = system.secondary_power(lights_on, fans_on) * dt_hours
    return profile


def _load_weather(cfg: ScenarioConfig, n_total):
    if not cfg.weather_files:
        logger.info("Using the bundled synthetic hurricane week")
        return synthetic_irma_week(cfg.start, n_total, cfg.dt_hours), None
    records = []
    for path in cfg.weather_files:
        records.extend(parse_weather_csv(path, cfg.weather_schema))
    records.sort(key=lambda r: r.timestamp)
    try:
        exo = resample(records, cfg.dt_hours, start=cfg.start, n_steps=n_total)
    except InsufficientCoverage:
        exo = resample(records, cfg.dt_hours, start=cfg.start, n_steps=cfg.n_steps).padded(n_total)
    return exo, records


def _load_profiles(cfg: ScenarioConfig, records):
    source = cfg.historical_source
    if source is not None:
        path = Path(source)
        if path.is_dir():
            return load_historical_profiles(path)
        return build_historical_profile(parse_weather_csv(path, cfg.weather_schema), cfg.dt_hours)
    if records is not None:
        logger.warning("No historical source given; averaging the run's own weather records")
        return build_historical_profile(records, cfg.dt_hours)
    return synthetic_historical_profiles(cfg.start, int(math.ceil(cfg.duration_days)) + 2, cfg.dt_hours)


def build_controller(cfg: ScenarioConfig, system: SystemConfig, disc):
    if cfg.controller == "mpc":
        return MpcController(cfg.mpc, system, disc, cfg.solver, dump_lp_dir=cfg.dump_lp_dir)
    if cfg.controller == "rule_based":
        return RuleBasedController(cfg.rule_based, system, disc, house_pred=cfg.mpc.house_pred)
    return BaselineController(system, cfg.dt_hours)


def run_scenario(cfg: ScenarioConfig):
    """Closed-loop simulation of one controller; returns (RunTrace, ResiliencyReport)."""
    system = cfg.plant_system
    disc = discretize_fridge(system, cfg.dt_hours)
    controller = build_controller(cfg, system, disc)
    n_run = cfg.n_steps
    n_total = n_run + controller.horizon_steps
    exo, records = _load_weather(cfg, n_total)
    exo = exo.with_secondary(build_secondary_profile(n_total * cfg.dt_hours / 24.0, system, cfg.dt_hours, exo.start))
    profiles = _load_profiles(cfg, records)
    house = build_house_model(cfg.house_model, cfg.dt_hours, dict(cfg.house_params))
    forecaster = Forecaster(exo, system, profiles, cfg.forecast_mode, seed=cfg.forecast_seed, sigma=cfg.forecast_sigma)
    state = PlantState.initial(system, house, exo.ambient_temp[0], e_bat=cfg.e_bat_initial, t_fr=cfg.t_fr_initial)

    logger.info(f"Running {controller.name} for {n_run} steps (size {cfg.size or 'custom'}, house model {cfg.house_model})")
    run = RunTrace(dt_hours=cfg.dt_hours, controller=controller.name)
    for k in range(n_run):
        when = exo.timestamp(k)
        t_meas, _ = house.advance(state.house_state, exo.ambient_temp[k])
        ctx = ControlContext(k=k, state=state, timestamp=when, t_house_meas=t_meas, forecaster=forecaster)
        try:
            command, diagnostics = controller.control(ctx)
        except (ResiliencyError, np.linalg.LinAlgError) as e:
            logger.warning(f"Step {k}: controller failed ({e}); applying safe command")
            command, diagnostics = ControlCommand.safe(), StepDiagnostics(fallback=True)
        state, accounting = step(state, command, exo.ghi[k], exo.secondary_demand[k], exo.ambient_temp[k], system, disc, house, cfg.dt_hours)
        run.append(when, state, command, accounting, diagnostics)
        if k and k % exo.steps_per_day == 0:
            logger.info(f"{controller.name}: day {k // exo.steps_per_day} done, E_bat={state.e_bat:.0f} Wh T_fr={state.t_fr:.2f} C")

    report = summarize(run, system, forecast_fallback_steps=len(forecaster.persistence_fallbacks))
    if report.forecast_fallback_steps:
        logger.warning(f"{controller.name}: {report.forecast_fallback_steps} steps had no day-old irradiance and used the true values")
    logger.info(f"{controller.name}: PRM={report.prm:.2f} h/day SRM={report.srm:.2f}%")
    return run, report


def generate_profiles(cfg: ScenarioConfig, directory, n_days=None):
    """Writes the secondary demand profile and the historical temperature profiles used by a scenario."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n_days = n_days or cfg.duration_days
    system = cfg.plant_system
    profile = build_secondary_profile(n_days, system, cfg.dt_hours, cfg.start)
    timestamps = [(cfg.start + timedelta(hours=k * cfg.dt_hours)).strftime("%Y-%m-%dT%H:%M") for k in range(len(profile))]
    secondary_path = directory / "secondary_profile.csv"
    pd.DataFrame({"timestamp": timestamps, "e_s_wh": profile}).to_csv(secondary_path, index=False, float_format="%.6f", lineterminator="\n")
    records = None
    if cfg.weather_files:
        records = [record for path in cfg.weather_files for record in parse_weather_csv(path, cfg.weather_schema)]
    profiles = _load_profiles(cfg, records)
    history_dir = write_historical_profiles(profiles, directory / "historical", cfg.dt_hours)
    logger.info(f"Wrote {len(profile)} secondary demand steps and {len(profiles)} historical days to {directory}")
    return {"secondary_profile": str(secondary_path), "historical_dir": str(history_dir), "steps": len(profile), "days": len(profiles)}
