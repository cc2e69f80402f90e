from pv_resiliency.controllers.base import ControlContext, Controller, Forecaster, StepDiagnostics, predict_house_temp
from pv_resiliency.controllers.mpc import MpcConfig, MpcController, MpcDecisionLayout, build_problem, map_gamma
from pv_resiliency.controllers.rules import (
    BaselineController,
    MismatchReport,
    RuleBasedConfig,
    RuleBasedController,
    baseline_step,
    battery_logic,
    rulebased_internal_sim,
    secondary_logic,
)

__all__ = [
    "BaselineController",
    "ControlContext",
    "Controller",
    "Forecaster",
    "MismatchReport",
    "MpcConfig",
    "MpcController",
    "MpcDecisionLayout",
    "RuleBasedConfig",
    "RuleBasedController",
    "StepDiagnostics",
    "baseline_step",
    "battery_logic",
    "build_problem",
    "map_gamma",
    "predict_house_temp",
    "rulebased_internal_sim",
    "secondary_logic",
]
