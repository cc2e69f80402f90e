import logging
import math
from dataclasses import asdict, dataclass
from datetime import datetime

import numpy as np

from pv_resiliency.errors import SliceTooShort
from pv_resiliency.plant.simulator import ControlCommand, PlantState
from pv_resiliency.plant.system import SystemConfig, pv_energy
from pv_resiliency.weather import ExogenousTrace, ForecastMode, forecast_irradiance, historical_window

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepDiagnostics:
    solver_status: str = ""
    nodes: int = 0
    solve_time: float = 0.0
    objective: float = math.nan
    gamma: float = math.nan
    fallback: bool = False

    def to_dict(self):
        return asdict(self)


class Forecaster:
    """Everything a controller may know about the future at step k."""

    def __init__(self, trace: ExogenousTrace, system: SystemConfig, profiles, mode=ForecastMode.PERFECT, seed=0, sigma=0.2):
        self.trace = trace
        self.system = system
        self.profiles = profiles
        self.mode = ForecastMode(mode)
        self.seed = seed
        self.sigma = sigma
        self.persistence_fallbacks = set()

    @property
    def dt_hours(self):
        return self.trace.dt_hours

    def pv_energy(self, k, n_steps):
        if self.mode == ForecastMode.PERSISTENCE and k < self.trace.steps_per_day:
            self.persistence_fallbacks.add(k)
        ghi = forecast_irradiance(self.trace, k, n_steps, self.mode, seed=self.seed, sigma=self.sigma)
        return np.array([pv_energy(self.system, g, self.dt_hours) for g in ghi])

    def secondary(self, k, n_steps):
        return self.trace.secondary_demand[k : k + n_steps].copy()

    def house_history(self, k, n_steps):
        return historical_window(self.profiles, self.trace.timestamp(k), n_steps, self.dt_hours)


def predict_house_temp(t_meas, t_hist, n_steps, mode="offset"):
    """House temperature over the horizon: the historical shape shifted onto the measurement.

    ``mode="constant"`` holds the measurement for every step.
    """
    t_hist = np.asarray(t_hist, dtype=float)
    if len(t_hist) < n_steps:
        raise SliceTooShort(f"Historical slice has {len(t_hist)} values, horizon needs {n_steps}")
    if mode == "constant":
        return np.full(n_steps, float(t_meas))
    prediction = t_hist[:n_steps] + (float(t_meas) - t_hist[0])
    prediction[0] = float(t_meas)
    return prediction


@dataclass(frozen=True)
class ControlContext:
    k: int
    state: PlantState
    timestamp: datetime
    t_house_meas: float
    forecaster: Forecaster


class Controller:
    name = "controller"

    def control(self, ctx: ControlContext):
        """Returns (ControlCommand, StepDiagnostics) for the current step."""
        raise NotImplementedError

    @property
    def horizon_steps(self):
        return 1

    def safe_command(self):
        return ControlCommand.safe()
