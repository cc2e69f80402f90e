import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from pv_resiliency.errors import ConfigurationError
from pv_resiliency.plant import (
    ControlCommand,
    FirstOrderRC,
    LinearStateSpace,
    PlantState,
    SystemConfig,
    TraceDriven,
    build_house_model,
    deliverable_energy,
    discretize_fridge,
    pv_energy,
    step,
    thermostat,
)

DT = 1.0 / 6.0
E_FR = 250.0 * DT


def state_at(system, e_bat=None, t_fr=2.0, compressor_on=False, t_house=27.0):
    e_bat = system.e_bat_max if e_bat is None else e_bat
    return PlantState(e_bat=e_bat, t_fr=t_fr, compressor_on=compressor_on, house_state=(t_house,))


def test_fridge_discretization(system):
    disc = discretize_fridge(system, DT)
    tau = system.r_fr * system.c_fr
    assert disc.a == pytest.approx(math.exp(-600.0 / tau))
    assert disc.d == pytest.approx(1.0 - disc.a)
    assert disc.b == pytest.approx(-disc.d * system.r_fr)
    assert disc.q_fr == pytest.approx(0.2324 * 250.0)
    # no compressor and the house at the fridge temperature: nothing moves
    assert disc.next_temp(3.0, False, 3.0) == pytest.approx(3.0)
    assert disc.next_temp(3.0, True, 27.0) < disc.next_temp(3.0, False, 27.0)
    with pytest.raises(ConfigurationError):
        discretize_fridge(system, 0.0)


def test_pv_energy(system):
    assert pv_energy(system, 1000.0, DT) == pytest.approx(142.5)
    assert pv_energy(system, 0.0, DT) == 0.0
    with pytest.raises(ConfigurationError):
        pv_energy(system, -1.0, DT)


@pytest.mark.parametrize(
    "t_fr, latched, expected",
    [(4.5, False, True), (-0.5, True, False), (2.0, True, True), (2.0, False, False), (4.0, False, False), (0.0, True, True)],
)
def test_thermostat_hysteresis(system, t_fr, latched, expected):
    assert thermostat(state_at(system, t_fr=t_fr, compressor_on=latched), system) is expected


@settings(max_examples=200, deadline=None)
@given(t_fr=st.floats(min_value=-10.0, max_value=15.0), latched=st.booleans())
def test_thermostat_band(system, t_fr, latched):
    on = thermostat(state_at(system, t_fr=t_fr, compressor_on=latched), system)
    if t_fr > system.t_fr_max:
        assert on
    elif t_fr < system.t_fr_min:
        assert not on
    else:
        assert on is latched


@settings(max_examples=200, deadline=None)
@given(
    first=st.floats(min_value=-5.0, max_value=15.0),
    second=st.floats(min_value=-5.0, max_value=15.0),
    compressor_on=st.booleans(),
    t_house=st.floats(min_value=15.0, max_value=40.0),
)
def test_fridge_step_is_a_contraction(disc, first, second, compressor_on, t_house):
    gap = abs(disc.next_temp(first, compressor_on, t_house) - disc.next_temp(second, compressor_on, t_house))
    assert gap == pytest.approx(disc.a * abs(first - second), abs=1e-9)
    assert gap <= abs(first - second) + 1e-12


def test_command_validation():
    with pytest.raises(ConfigurationError):
        ControlCommand(c=1, d=1, x_bat=1)
    with pytest.raises(ConfigurationError):
        ControlCommand(c=0, x_bat=2)
    with pytest.raises(ConfigurationError):
        ControlCommand(c=1, x_bat=3)
    with pytest.raises(ConfigurationError):
        ControlCommand(c=1, x_bat=0)
    assert ControlCommand.safe() == ControlCommand(u_fr=0, u_s=0, c=0, d=0, x_bat=0)


def test_system_validation_and_presets():
    with pytest.raises(ConfigurationError):
        SystemConfig(eta_c=0.0)
    with pytest.raises(ConfigurationError):
        SystemConfig(e_bat_min=6000.0)
    with pytest.raises(ConfigurationError):
        SystemConfig.from_dict({"n_pv": 3, "colour": "blue"})
    base = SystemConfig()
    assert base.cost_usd == pytest.approx(1100.0)
    bigger = base.scaled(4, 4)
    assert bigger.e_bat_max == pytest.approx(10800.0)
    assert bigger.e_bat_min == pytest.approx(2160.0)
    assert bigger.e_bat_c_max == pytest.approx(1620.0)
    assert bigger.cost_usd == pytest.approx(2000.0)


def test_initial_state(system, house):
    state = PlantState.initial(system, house, 27.0)
    assert state.e_bat == system.e_bat_max
    assert state.house_state == (27.0,)
    assert PlantState.initial(system, house, 27.0, t_fr=5.0).compressor_on
    with pytest.raises(ConfigurationError):
        PlantState.initial(system, house, 27.0, e_bat=100.0)


def test_deliverable_energy(system):
    assert deliverable_energy(system, system.e_bat_min) == 0.0
    assert deliverable_energy(system, system.e_bat_min + 100.0) == pytest.approx(90.0)
    assert deliverable_energy(system, system.e_bat_max) == pytest.approx(system.e_bat_dc_max)


def test_sunny_step_serves_loads_and_charges(system, disc, house):
    state = state_at(system, e_bat=3000.0, t_fr=5.0)
    command = ControlCommand(u_fr=1, u_s=1, c=1, x_bat=1)
    after, acc = step(state, command, 1000.0, 8.0, 27.0, system, disc, house, DT)
    assert acc.compressor_run
    assert acc.e_hl == pytest.approx((E_FR + 8.0) / 0.9)
    assert acc.e_c == pytest.approx(142.5 - acc.e_hl)
    assert acc.e_pv_used == pytest.approx(142.5)
    assert after.e_bat == pytest.approx(3000.0 + 0.9 * acc.e_c)
    assert after.t_fr < state.t_fr
    assert after.step == 1


def test_fast_charge_uses_multiplier(disc, house):
    system = SystemConfig(e_bat_c_max=50.0)
    state = state_at(system, e_bat=3000.0)
    _, normal = step(state, ControlCommand(c=1, x_bat=1), 1000.0, 0.0, 27.0, system, disc, house, DT)
    _, fast = step(state, ControlCommand(c=1, x_bat=2), 1000.0, 0.0, 27.0, system, disc, house, DT)
    assert normal.e_c == pytest.approx(50.0)
    assert fast.e_c == pytest.approx(100.0)


def test_night_discharge_sheds_secondary_first(system, disc, house):
    state = state_at(system, e_bat=system.e_bat_min + 60.0 / 0.9, t_fr=5.0)
    command = ControlCommand(u_fr=1, u_s=1, d=1)
    after, acc = step(state, command, 0.0, 51.33, 27.0, system, disc, house, DT)
    assert acc.shed_secondary and not acc.shed_fridge
    assert acc.e_s_served == 0.0
    assert acc.e_fr == pytest.approx(E_FR)
    assert acc.e_dc == pytest.approx(E_FR / 0.9)
    assert after.e_bat >= system.e_bat_min


def test_empty_battery_sheds_everything(system, disc, house):
    state = state_at(system, e_bat=system.e_bat_min, t_fr=5.0)
    after, acc = step(state, ControlCommand(u_fr=1, u_s=1, d=1), 0.0, 51.33, 27.0, system, disc, house, DT)
    assert acc.shed_secondary and acc.shed_fridge
    assert not acc.compressor_run
    assert acc.e_hl == 0.0
    assert after.e_bat == pytest.approx(system.e_bat_min)
    assert after.t_fr > state.t_fr


def test_compressor_follows_thermostat(system, disc, house):
    state = state_at(system, t_fr=2.0, compressor_on=False)
    _, acc = step(state, ControlCommand(u_fr=1, d=1), 0.0, 0.0, 27.0, system, disc, house, DT)
    assert not acc.compressor_run
    assert acc.e_fr == 0.0


@settings(max_examples=200, deadline=None)
@given(
    ghi=st.floats(min_value=0.0, max_value=1200.0),
    e_bat=st.floats(min_value=1080.0, max_value=5400.0),
    t_fr=st.floats(min_value=-2.0, max_value=8.0),
    latched=st.booleans(),
    e_s=st.sampled_from([0.0, 8.0, 51.33]),
    u_fr=st.integers(0, 1),
    u_s=st.integers(0, 1),
    mode=st.sampled_from(["idle", "charge", "fast", "discharge"]),
)
def test_step_energy_balance(system, disc, ghi, e_bat, t_fr, latched, e_s, u_fr, u_s, mode):
    c, d, x_bat = {"idle": (0, 0, 0), "charge": (1, 0, 1), "fast": (1, 0, 2), "discharge": (0, 1, 0)}[mode]
    state = state_at(system, e_bat=e_bat, t_fr=t_fr, compressor_on=latched)
    command = ControlCommand(u_fr=u_fr, u_s=u_s, c=c, d=d, x_bat=x_bat)
    after, acc = step(state, command, ghi, e_s, 27.0, system, disc, TraceDriven(), DT)
    assert acc.e_pv_used == pytest.approx(acc.e_hl + acc.e_c - acc.e_dc)
    assert -1e-9 <= acc.e_pv_used <= acc.e_pv_avail + 1e-9
    assert system.e_bat_min - 1e-9 <= after.e_bat <= system.e_bat_max + 1e-9
    assert acc.e_s_served in (0.0, acc.e_s_desired)
    assert acc.e_c == 0.0 or acc.e_dc == 0.0


def test_rc_house_lags_ambient():
    model = FirstOrderRC(r_h=0.005, c_h=1.0e7, dt_hours=DT)
    state = model.initial_state(25.0)
    t_now, state = model.advance(state, 35.0)
    assert t_now == 25.0
    t_next, _ = model.advance(state, 35.0)
    assert 25.0 < t_next < 35.0
    assert t_next == pytest.approx(25.0 + (1.0 - model.decay) * 10.0)


def test_state_space_matches_rc():
    r_h, c_h = 0.005, 1.0e7
    rc = FirstOrderRC(r_h=r_h, c_h=c_h, dt_hours=DT)
    ss = LinearStateSpace([[-1.0 / (r_h * c_h)]], [1.0 / (r_h * c_h)], [1.0], DT)
    rc_state, ss_state = rc.initial_state(25.0), ss.initial_state(25.0)
    assert ss_state[0] == pytest.approx(25.0)
    for ambient in (30.0, 32.0, 28.0, 26.0):
        rc_temp, rc_state = rc.advance(rc_state, ambient)
        ss_temp, ss_state = ss.advance(ss_state, ambient)
        assert ss_temp == pytest.approx(rc_temp)


def test_build_house_model():
    assert isinstance(build_house_model("trace", DT), TraceDriven)
    assert build_house_model("rc", DT, {"r_h": 0.01}).r_h == 0.01
    model = build_house_model("state_space", DT, {"a": [[-1e-5]], "b": [1e-5], "c": [1.0]})
    assert isinstance(model, LinearStateSpace)
    with pytest.raises(ConfigurationError):
        build_house_model("state_space", DT, {"a": [[-1e-5]]})
    with pytest.raises(ConfigurationError):
        build_house_model("igloo", DT)
    with pytest.raises(ConfigurationError):
        LinearStateSpace([[1.0, 0.0]], [1.0], [1.0], DT)


@pytest.mark.parametrize("compressor_on", [False, True])
def test_zero_order_hold_matches_integrated_ode(system, disc, compressor_on):
    t_house = 27.0
    q = system.q_fr if compressor_on else 0.0
    tau = system.r_fr * system.c_fr

    def rhs(_, temp):
        return [(t_house - temp[0]) / tau - q / system.c_fr]

    times = np.arange(145) * 600.0
    reference = solve_ivp(rhs, (0.0, times[-1]), [2.0], t_eval=times, method="DOP853", rtol=1e-12, atol=1e-12).y[0]
    temp = 2.0
    for k in range(1, 145):
        temp = disc.next_temp(temp, compressor_on, t_house)
        assert temp == pytest.approx(reference[k], abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(t_start=st.floats(min_value=0.0, max_value=4.0), latched=st.booleans(), t_house=st.floats(min_value=15.0, max_value=40.0))
def test_fridge_holds_band_with_ample_supply(system, disc, t_start, latched, t_house):
    # one step of drift past each edge before the thermostat reacts
    above = disc.next_temp(system.t_fr_max, False, t_house) - system.t_fr_max
    below = system.t_fr_min - disc.next_temp(system.t_fr_min, True, t_house)
    state = state_at(system, t_fr=t_start, compressor_on=latched, t_house=t_house)
    for _ in range(288):
        state, acc = step(state, ControlCommand(u_fr=1, c=1, x_bat=1), 1000.0, 0.0, t_house, system, disc, TraceDriven(), DT)
        assert not acc.shed_fridge
        assert system.t_fr_min - below - 1e-9 <= state.t_fr <= system.t_fr_max + above + 1e-9
