import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from pv_resiliency.errors import ConfigurationError

logger = logging.getLogger(__name__)


class HouseModel:
    """Produces the indoor temperature the refrigerator sits in.

    ``advance`` returns the temperature seen during the current step together
    with the internal state for the next one.
    """

    name = "base"

    def initial_state(self, t_ambient):
        raise NotImplementedError

    def advance(self, state, t_ambient):
        raise NotImplementedError


class TraceDriven(HouseModel):
    name = "trace"

    def initial_state(self, t_ambient):
        return (float(t_ambient),)

    def advance(self, state, t_ambient):
        return float(t_ambient), (float(t_ambient),)


@dataclass
class FirstOrderRC(HouseModel):
    """dT/dt = (T_amb - T) / (R_h * C_h), discretized exactly for a held ambient."""

    r_h: float = 0.005
    c_h: float = 1.0e7
    dt_hours: float = 1.0 / 6.0
    name: str = field(default="rc", init=False)

    def __post_init__(self):
        if not (self.r_h > 0 and self.c_h > 0 and self.dt_hours > 0):
            raise ConfigurationError("FirstOrderRC needs r_h, c_h and dt_hours > 0")
        self.decay = math.exp(-self.dt_hours * 3600.0 / (self.r_h * self.c_h))

    def initial_state(self, t_ambient):
        return (float(t_ambient),)

    def advance(self, state, t_ambient):
        t_house = state[0]
        return t_house, (self.decay * t_house + (1.0 - self.decay) * float(t_ambient),)


class LinearStateSpace(HouseModel):
    """Continuous x' = A x + B u, T_house = C x with scalar ambient input u.

    Discretized once with a zero-order hold through the augmented matrix exponential.
    """

    name = "state_space"

    def __init__(self, a, b, c, dt_hours, x0=None):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1, 1)
        c = np.asarray(c, dtype=float).reshape(1, -1)
        n = a.shape[0]
        if a.shape != (n, n) or b.shape[0] != n or c.shape[1] != n:
            raise ConfigurationError(f"State-space shapes do not agree: A{a.shape} B{b.shape} C{c.shape}")
        if not dt_hours > 0:
            raise ConfigurationError("dt_hours must be > 0")
        augmented = np.zeros((n + 1, n + 1))
        augmented[:n, :n] = a
        augmented[:n, n:] = b
        phi = expm(augmented * dt_hours * 3600.0)
        self.ad = phi[:n, :n]
        self.bd = phi[:n, n]
        self.c = c[0]
        self.x0 = None if x0 is None else np.asarray(x0, dtype=float)
        if np.max(np.abs(np.linalg.eigvals(self.ad))) >= 1.0:
            logger.warning("Discretized house model is not stable; temperatures may diverge")

    @classmethod
    def from_dict(cls, data, dt_hours):
        try:
            return cls(data["a"], data["b"], data["c"], dt_hours, data.get("x0"))
        except KeyError as e:
            raise ConfigurationError(f"State-space house model needs matrix {e}") from e

    def initial_state(self, t_ambient):
        if self.x0 is not None:
            return tuple(float(v) for v in self.x0)
        # steady state for a constant ambient
        n = self.ad.shape[0]
        x = np.linalg.solve(np.eye(n) - self.ad, self.bd * float(t_ambient))
        return tuple(float(v) for v in x)

    def advance(self, state, t_ambient):
        x = np.asarray(state, dtype=float)
        t_house = float(self.c @ x)
        if not math.isfinite(t_house):
            raise ConfigurationError("House model produced a non-finite temperature")
        return t_house, tuple(float(v) for v in self.ad @ x + self.bd * float(t_ambient))


def build_house_model(kind, dt_hours, params=None) -> HouseModel:
    params = dict(params or {})
    if kind == "trace":
        return TraceDriven()
    if kind == "rc":
        return FirstOrderRC(dt_hours=dt_hours, **params)
    if kind == "state_space":
        return LinearStateSpace.from_dict(params, dt_hours)
    raise ConfigurationError(f"Unknown house model '{kind}' (expected trace, rc or state_space)")
