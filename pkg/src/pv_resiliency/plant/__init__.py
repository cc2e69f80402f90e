from pv_resiliency.plant.house import FirstOrderRC, HouseModel, LinearStateSpace, TraceDriven, build_house_model
from pv_resiliency.plant.simulator import ControlCommand, PlantState, StepAccounting, deliverable_energy, step, thermostat
from pv_resiliency.plant.system import FridgeDiscretization, SystemConfig, discretize_fridge, pv_energy

__all__ = [
    "ControlCommand",
    "FirstOrderRC",
    "FridgeDiscretization",
    "HouseModel",
    "LinearStateSpace",
    "PlantState",
    "StepAccounting",
    "SystemConfig",
    "TraceDriven",
    "build_house_model",
    "deliverable_energy",
    "discretize_fridge",
    "pv_energy",
    "step",
    "thermostat",
]
