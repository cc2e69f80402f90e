import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pv_resiliency.controllers import (
    ControlContext,
    Forecaster,
    MpcConfig,
    MpcController,
    build_problem,
    map_gamma,
    predict_house_temp,
)
from pv_resiliency.controllers.mpc import idle_point
from pv_resiliency.errors import ConfigurationError, SliceTooShort
from pv_resiliency.milp import SolverLimits, SolveStatus, solve_milp
from pv_resiliency.plant import ControlCommand, PlantState
from pv_resiliency.weather import synthetic_historical_profiles
from tests.utils import START, constant_trace

N = 6
LIMITS = SolverLimits(node_limit=20000, time_limit=5.0)


def horizon(ghi, demand, n=N):
    e_pv = np.full(n, 3 * 285.0 * ghi / 1000.0 / 6.0)
    return e_pv, np.full(n, demand), np.full(n, 27.0)


def context(system, k, state, ghi=1000.0, demand=8.0):
    trace = constant_trace(60, ghi=ghi, demand=demand)
    forecaster = Forecaster(trace, system, synthetic_historical_profiles(START, 2))
    return ControlContext(k=k, state=state, timestamp=trace.timestamp(k), t_house_meas=27.0, forecaster=forecaster)


@pytest.mark.parametrize(
    "gamma, expected",
    [(-1.0, (0, 1, 0)), (-0.2, (0, 1, 0)), (0.0, (0, 0, 0)), (0.4, (1, 0, 1)), (1.0, (1, 0, 1)), (1.3, (1, 0, 2)), (2.0, (1, 0, 2))],
)
def test_map_gamma(gamma, expected):
    assert map_gamma(gamma) == expected


@settings(max_examples=300, deadline=None)
@given(gamma=st.floats(min_value=-1.0, max_value=2.0))
def test_map_gamma_is_a_valid_command(gamma):
    c, d, x_bat = map_gamma(gamma)
    assert c + d <= 1
    assert (x_bat > 0) == (c == 1)
    # fast charging only when the relaxed rate exceeds one normal step
    assert (x_bat == 2) == (gamma > 1.0)
    ControlCommand(c=c, d=d, x_bat=x_bat)


def test_predict_house_temp():
    assert predict_house_temp(25.0, [20.0, 22.0, 24.0, 30.0], 3) == pytest.approx([25.0, 27.0, 29.0])
    assert predict_house_temp(25.0, [20.0, 22.0, 24.0], 3, mode="constant") == pytest.approx([25.0, 25.0, 25.0])
    with pytest.raises(SliceTooShort):
        predict_house_temp(25.0, [20.0, 22.0], 3)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        MpcConfig(n_steps=0)
    with pytest.raises(ConfigurationError):
        MpcConfig(gamma_min=0.5)
    with pytest.raises(ConfigurationError):
        MpcConfig(house_pred="tomorrow")
    with pytest.raises(ConfigurationError):
        MpcConfig.from_dict({"horizon": 3})
    assert MpcConfig.from_dict({"n_steps": 12}, dt_hours=0.25).dt_hours == 0.25


def test_problem_layout(system, disc):
    cfg = MpcConfig(n_steps=N)
    e_pv, e_s, house = horizon(1000.0, 0.0)
    e_s[2] = 8.0
    problem, layout = build_problem(3000.0, 2.0, e_pv, e_s, house, cfg, system, disc)
    assert problem.num_vars == 2 * (N + 1) + 5 * N
    assert len(problem.constraints) == 2 + 4 * N
    assert problem.binary_indices().size == 2 * N
    assert [problem.upper[j] for j in layout.u_s] == [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
    assert problem.objective[layout.e_bat[1]] == pytest.approx(-1.0 / system.e_bat_c_max)
    assert layout.e_bat[0] not in problem.objective
    assert problem.objective[layout.zeta[0]] == pytest.approx(N)
    assert problem.objective[layout.zeta[-1]] == pytest.approx(1.0)
    assert problem.lower[layout.t_fr[1]] == system.t_fr_min
    with pytest.raises(ConfigurationError):
        build_problem(3000.0, 2.0, e_pv[:3], e_s, house, cfg, system, disc)


def test_idle_point_is_feasible(system, disc):
    cfg = MpcConfig(n_steps=N)
    e_pv, e_s, house = horizon(0.0, 51.33)
    problem, layout = build_problem(2000.0, 5.0, e_pv, e_s, house, cfg, system, disc)
    x = idle_point(problem, layout, 2000.0, 5.0, house, disc, system.t_fr_max)
    assert problem.is_feasible(x, tol=1e-6)


def test_layout_shift(system, disc):
    cfg = MpcConfig(n_steps=3)
    e_pv, e_s, house = horizon(1000.0, 0.0, n=3)
    problem, layout = build_problem(3000.0, 2.0, e_pv, e_s, house, cfg, system, disc)
    x = np.zeros(problem.num_vars)
    x[list(layout.gamma)] = [0.1, 0.2, 0.3]
    x[list(layout.t_fr)] = [2.0, 2.5, 3.0, 3.5]
    shifted = layout.shift(x)
    assert shifted[list(layout.gamma)] == pytest.approx([0.2, 0.3, 0.3])
    assert shifted[list(layout.t_fr)] == pytest.approx([2.5, 3.0, 3.5, 3.5])


def test_solution_respects_dynamics(system, disc):
    cfg = MpcConfig(n_steps=N)
    e_pv, e_s, house = horizon(600.0, 8.0)
    problem, layout = build_problem(2500.0, 4.5, e_pv, e_s, house, cfg, system, disc)
    solution = solve_milp(problem, LIMITS)
    assert solution.status == SolveStatus.OPTIMAL
    x = solution.x
    for k in range(N):
        u = x[layout.u_fr[k]]
        assert x[layout.t_fr[k + 1]] == pytest.approx(disc.next_temp(x[layout.t_fr[k]], u > 0.5, house[k]), abs=1e-6)
        assert x[layout.e_bat[k + 1]] == pytest.approx(x[layout.e_bat[k]] + x[layout.gamma[k]] * system.e_bat_c_max, abs=1e-6)
        assert x[layout.g[k]] <= e_pv[k] + 1e-6
        assert x[layout.zeta[k]] >= x[layout.t_fr[k + 1]] - system.t_fr_max - 1e-6
    assert np.all(x[list(layout.e_bat)] >= system.e_bat_min - 1e-6)


def test_sunny_warm_fridge_runs_compressor_and_charges(system, disc):
    controller = MpcController(MpcConfig(n_steps=N), system, disc, LIMITS)
    state = PlantState(e_bat=3000.0, t_fr=5.0, compressor_on=True, house_state=(27.0,))
    command, diag = controller.control(context(system, 0, state))
    assert diag.solver_status == SolveStatus.OPTIMAL.value
    assert not diag.fallback
    assert command.u_fr == 1
    assert command.u_s == 1
    assert (command.c, command.d, command.x_bat) == (1, 0, 1)
    assert 0.0 < diag.gamma <= 1.0


def test_empty_battery_at_night_stays_idle(system, disc):
    controller = MpcController(MpcConfig(n_steps=N), system, disc, LIMITS)
    state = PlantState(e_bat=system.e_bat_min, t_fr=3.0, compressor_on=False, house_state=(27.0,))
    command, diag = controller.control(context(system, 0, state, ghi=0.0, demand=51.33))
    assert diag.solver_status == SolveStatus.OPTIMAL.value
    assert (command.u_fr, command.u_s, command.c, command.d) == (0, 0, 0, 0)


def test_consecutive_steps_warm_start_and_dump(system, disc, tmp_path):
    controller = MpcController(MpcConfig(n_steps=N), system, disc, LIMITS, dump_lp_dir=str(tmp_path))
    state = PlantState(e_bat=3000.0, t_fr=3.0, compressor_on=False, house_state=(27.0,))
    for k in range(3):
        _, diag = controller.control(context(system, k, state, ghi=500.0))
        assert diag.solver_status == SolveStatus.OPTIMAL.value
    assert sorted(p.name for p in tmp_path.iterdir()) == ["step_00000.lp", "step_00001.lp", "step_00002.lp"]
    assert "Binaries" in (tmp_path / "step_00000.lp").read_text(encoding="utf-8")


def test_same_snapshot_gives_same_command(system, disc):
    state = PlantState(e_bat=2500.0, t_fr=4.5, compressor_on=True, house_state=(27.0,))
    first = MpcController(MpcConfig(n_steps=N), system, disc, LIMITS).control(context(system, 0, state, ghi=400.0, demand=51.33))
    second = MpcController(MpcConfig(n_steps=N), system, disc, LIMITS).control(context(system, 0, state, ghi=400.0, demand=51.33))
    assert first[0] == second[0]
    assert first[1].gamma == second[1].gamma
    assert first[1].objective == second[1].objective


def test_secondary_service_grows_with_lambda4(system, disc):
    # scarce night energy: every secondary step served costs stored charge
    e_pv, e_s, house = horizon(0.0, 51.33)
    served = []
    for lambda4 in (0.0, 0.5, 2.0, 10.0, 50.0):
        problem, layout = build_problem(system.e_bat_min + 250.0, 3.0, e_pv, e_s, house, MpcConfig(n_steps=N, lambda4=lambda4), system, disc)
        solution = solve_milp(problem, LIMITS)
        assert solution.status == SolveStatus.OPTIMAL
        served.append(sum((N - k) * round(solution.x[layout.u_s[k]]) for k in range(N)))
    assert served == sorted(served)
    assert served[-1] > 0
