import math
from dataclasses import asdict, dataclass, fields, replace

from pv_resiliency.config import check_keys
from pv_resiliency.errors import ConfigurationError

PANEL_PRICE_USD = 100.0
BATTERY_UNIT_PRICE_USD = 400.0
SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class SystemConfig:
    """Physical constants of the PV, battery, inverter and loads.

    Energies are Wh, powers W, temperatures degC. Battery energies describe the
    whole bank of ``battery_units`` units.
    """

    n_pv: int = 3
    p_pv_rated: float = 285.0
    g_std: float = 1000.0
    battery_units: int = 2
    e_bat_min: float = 1080.0
    e_bat_max: float = 5400.0
    e_bat_c_max: float = 810.0
    e_bat_dc_max: float = 844.5
    eta_c: float = 0.9
    eta_dc: float = 0.9
    eta_inv: float = 0.9
    p_fr_rated: float = 250.0
    t_fr_min: float = 0.0
    t_fr_max: float = 4.0
    r_fr: float = 1.4749
    c_fr: float = 8937.4
    cop: float = 0.2324
    n_lights: int = 6
    p_light: float = 8.0
    n_fans: int = 4
    p_fan: float = 65.0
    fast_charge_multiplier: float = 2.0

    def __post_init__(self):
        for name in ("eta_c", "eta_dc", "eta_inv"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigurationError(f"{name} must be in (0, 1], got {value}")
        if not self.e_bat_min < self.e_bat_max:
            raise ConfigurationError(f"e_bat_min ({self.e_bat_min}) must be below e_bat_max ({self.e_bat_max})")
        if self.e_bat_min < 0:
            raise ConfigurationError("e_bat_min must be >= 0")
        if not self.t_fr_min < self.t_fr_max:
            raise ConfigurationError(f"t_fr_min ({self.t_fr_min}) must be below t_fr_max ({self.t_fr_max})")
        for name in ("n_pv", "p_pv_rated", "g_std", "battery_units", "e_bat_c_max", "e_bat_dc_max", "p_fr_rated", "r_fr", "c_fr", "cop"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("n_lights", "p_light", "n_fans", "p_fan"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.fast_charge_multiplier < 1:
            raise ConfigurationError("fast_charge_multiplier must be >= 1")

    @classmethod
    def from_dict(cls, data):
        data = dict(data or {})
        check_keys(data, [f.name for f in fields(cls)], "system")
        return cls(**data)

    def to_dict(self):
        return asdict(self)

    def scaled(self, n_pv, battery_units):
        """Same components with a different panel count and battery unit count."""
        ratio = battery_units / self.battery_units
        return replace(
            self,
            n_pv=n_pv,
            battery_units=battery_units,
            e_bat_min=self.e_bat_min * ratio,
            e_bat_max=self.e_bat_max * ratio,
            e_bat_c_max=self.e_bat_c_max * ratio,
            e_bat_dc_max=self.e_bat_dc_max * ratio,
        )

    @property
    def cost_usd(self):
        return PANEL_PRICE_USD * self.n_pv + BATTERY_UNIT_PRICE_USD * self.battery_units

    @property
    def q_fr(self):
        return self.cop * self.p_fr_rated

    def fridge_energy(self, dt_hours):
        return self.p_fr_rated * dt_hours

    def secondary_power(self, lights_on, fans_on):
        return (self.n_lights * self.p_light if lights_on else 0.0) + (self.n_fans * self.p_fan if fans_on else 0.0)


@dataclass(frozen=True)
class FridgeDiscretization:
    """T(k+1) = a*T(k) + b*u*q_fr + d*T_house(k)."""

    a: float
    b: float
    d: float
    q_fr: float

    def next_temp(self, t_fr, compressor_on, t_house):
        return self.a * t_fr + self.b * (self.q_fr if compressor_on else 0.0) + self.d * t_house

    def overshoot(self, t_fr, t_house):
        return (1.0 - self.a) * abs(t_house - t_fr + self.b / (1.0 - self.a) * self.q_fr) if self.a < 1.0 else 0.0


def discretize_fridge(cfg: SystemConfig, dt_hours) -> FridgeDiscretization:
    if not dt_hours > 0:
        raise ConfigurationError(f"dt_hours must be > 0, got {dt_hours}")
    tau = cfg.r_fr * cfg.c_fr
    a = math.exp(-dt_hours * SECONDS_PER_HOUR / tau)
    # -expm1 keeps 1 - a accurate for small steps
    d = -math.expm1(-dt_hours * SECONDS_PER_HOUR / tau)
    return FridgeDiscretization(a=a, b=-d * cfg.r_fr, d=d, q_fr=cfg.q_fr)


def pv_energy(cfg: SystemConfig, ghi, dt_hours):
    if ghi < 0:
        raise ConfigurationError(f"Irradiance must be >= 0, got {ghi}")
    return cfg.n_pv * cfg.p_pv_rated * (ghi / cfg.g_std) * dt_hours
