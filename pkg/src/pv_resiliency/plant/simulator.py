import logging
from dataclasses import asdict, dataclass

from pv_resiliency.errors import ConfigurationError
from pv_resiliency.plant.house import HouseModel
from pv_resiliency.plant.system import FridgeDiscretization, SystemConfig, pv_energy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlantState:
    e_bat: float
    t_fr: float
    compressor_on: bool
    house_state: tuple
    step: int = 0

    @classmethod
    def initial(cls, cfg: SystemConfig, house: HouseModel, t_ambient, e_bat=None, t_fr=2.0):
        e_bat = cfg.e_bat_max if e_bat is None else float(e_bat)
        if not cfg.e_bat_min <= e_bat <= cfg.e_bat_max:
            raise ConfigurationError(f"Initial battery energy {e_bat} outside [{cfg.e_bat_min}, {cfg.e_bat_max}]")
        return cls(e_bat=e_bat, t_fr=float(t_fr), compressor_on=t_fr > cfg.t_fr_max, house_state=house.initial_state(t_ambient))


@dataclass(frozen=True)
class ControlCommand:
    u_fr: int = 0
    u_s: int = 0
    c: int = 0
    d: int = 0
    x_bat: int = 0

    def __post_init__(self):
        if self.c and self.d:
            raise ConfigurationError("Charging and discharging cannot both be enabled")
        if self.x_bat not in (0, 1, 2):
            raise ConfigurationError(f"x_bat must be 0, 1 or 2, got {self.x_bat}")
        if (self.x_bat > 0) != bool(self.c):
            raise ConfigurationError(f"x_bat={self.x_bat} is inconsistent with c={self.c}")

    @classmethod
    def safe(cls):
        return cls()


@dataclass(frozen=True)
class StepAccounting:
    e_pv_avail: float
    e_pv_used: float
    e_hl: float
    e_fr: float
    e_s_desired: float
    e_s_served: float
    e_c: float
    e_dc: float
    shed_secondary: bool
    shed_fridge: bool
    compressor_run: bool
    t_house: float

    def to_dict(self):
        return asdict(self)


def thermostat(state: PlantState, cfg: SystemConfig) -> bool:
    if state.t_fr > cfg.t_fr_max:
        return True
    if state.t_fr < cfg.t_fr_min:
        return False
    return state.compressor_on


def deliverable_energy(cfg: SystemConfig, e_bat):
    """Largest energy the battery can put on the bus this step without crossing its floor."""
    return max(0.0, min((e_bat - cfg.e_bat_min) * cfg.eta_dc, cfg.e_bat_dc_max))


def step(
    state: PlantState,
    cmd: ControlCommand,
    ghi,
    e_s_desired,
    t_ambient,
    cfg: SystemConfig,
    disc: FridgeDiscretization,
    house: HouseModel,
    dt_hours,
):
    latch = thermostat(state, cfg)
    compressor_run = bool(cmd.u_fr) and latch
    e_pv = pv_energy(cfg, ghi, dt_hours)
    e_fr = cfg.fridge_energy(dt_hours) if compressor_run else 0.0
    e_s = float(e_s_desired) if cmd.u_s else 0.0
    e_hl = (e_fr + e_s) / cfg.eta_inv

    available = e_pv + (deliverable_energy(cfg, state.e_bat) if cmd.d else 0.0)
    shed_secondary = shed_fridge = False
    if available < e_hl and e_s > 0:
        e_s = 0.0
        shed_secondary = True
        e_hl = e_fr / cfg.eta_inv
    if available < e_hl and compressor_run:
        compressor_run = False
        shed_fridge = True
        e_fr = 0.0
        e_hl = e_s / cfg.eta_inv
    if shed_secondary or shed_fridge:
        logger.debug(f"Step {state.step}: shed secondary={shed_secondary} fridge={shed_fridge} (available {available:.2f} Wh)")

    e_c = 0.0
    e_dc = 0.0
    if cmd.c:
        rate = cfg.fast_charge_multiplier if cmd.x_bat == 2 else 1.0
        e_c = max(0.0, min(e_pv - e_hl, cfg.e_bat_max - state.e_bat, rate * cfg.e_bat_c_max))
    if cmd.d:
        e_dc = max(0.0, min(e_hl - e_pv, (state.e_bat - cfg.e_bat_min) * cfg.eta_dc, cfg.e_bat_dc_max))
    e_pv_used = e_hl + e_c - e_dc
    e_bat = state.e_bat + cfg.eta_c * e_c - e_dc / cfg.eta_dc

    t_house, house_state = house.advance(state.house_state, t_ambient)
    t_fr = disc.next_temp(state.t_fr, compressor_run, t_house)
    accounting = StepAccounting(
        e_pv_avail=e_pv,
        e_pv_used=e_pv_used,
        e_hl=e_hl,
        e_fr=e_fr,
        e_s_desired=float(e_s_desired),
        e_s_served=e_s,
        e_c=e_c,
        e_dc=e_dc,
        shed_secondary=shed_secondary,
        shed_fridge=shed_fridge,
        compressor_run=compressor_run,
        t_house=t_house,
    )
    return PlantState(e_bat=e_bat, t_fr=t_fr, compressor_on=latch, house_state=house_state, step=state.step + 1), accounting
