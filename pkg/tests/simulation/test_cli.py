import json

import pandas as pd
import pytest

from pv_resiliency.cli import build_parser, main, scenario_from_args
from pv_resiliency.weather import ForecastMode

QUICK = ["--days", "0.0833333333", "--horizon-hours", "1"]


def test_flags_override_configuration():
    args = build_parser().parse_args(
        [
            "run",
            "--controller",
            "rule_based",
            "--size",
            "C",
            "--dt-minutes",
            "15",
            "--horizon-hours",
            "3",
            "--fast-charge-budget",
            "2",
            "--forecast-mode",
            "noisy",
            "--house-model",
            "rc",
            "--house-param",
            "r_h=0.01",
            "--node-limit",
            "500",
        ]
    )
    cfg = scenario_from_args(args)
    assert cfg.controller == "rule_based"
    assert cfg.plant_system.n_pv == 4
    assert cfg.dt_hours == 0.25
    assert cfg.mpc.n_steps == 12
    assert cfg.rule_based.n_steps == 12
    assert cfg.rule_based.dt_hours == 0.25
    assert cfg.rule_based.fast_charge_budget_hours == 2.0
    assert cfg.forecast_mode == ForecastMode.NOISY
    assert cfg.house_params == (("r_h", 0.01),)
    assert cfg.solver.node_limit == 500
    assert cfg.solver.time_limit == 10.0


def test_run_writes_outputs(tmp_path, capsys):
    assert main(["run", "--controller", "baseline", "--days", "0.25", "--output-dir", str(tmp_path)]) == 0
    assert "baseline: PRM=" in capsys.readouterr().out
    assert len(pd.read_csv(tmp_path / "trace_baseline.csv")) == 36
    report = json.loads((tmp_path / "report_baseline.json").read_text(encoding="utf-8"))
    assert 0.0 <= report["prm"] <= 24.0


def test_run_all_controllers_with_figures(tmp_path):
    assert main(["run", "--controller", "all", "--figures", *QUICK, "--output-dir", str(tmp_path)]) == 0
    for controller in ("mpc", "baseline", "rule_based"):
        assert (tmp_path / f"trace_{controller}.csv").exists()
    blocks = (tmp_path / "fig_temperature_soc.dat").read_text(encoding="utf-8").split("\n\n\n")
    assert len(blocks) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--controller", "baseline", "--dt-minutes", "7"],
        ["run", "--controller", "baseline", "--house-param", "r_h"],
        ["run", "--controller", "baseline", "--start", "not a date"],
        ["run", "--controller", "baseline", "--horizon-hours", "0.3"],
    ],
)
def test_configuration_errors_exit_2(tmp_path, argv):
    assert main([*argv, "--days", "0.1", "--output-dir", str(tmp_path)]) == 2


def test_missing_weather_file_exits_1(tmp_path):
    argv = ["run", "--controller", "baseline", "--days", "0.1", "--weather", str(tmp_path / "none.csv"), "--output-dir", str(tmp_path)]
    assert main(argv) == 1


def test_validate_solver_command(tmp_path, capsys):
    assert main(["validate-solver", "--n-milp", "5", "--n-lp", "5", "--max-binary", "4", "--output-dir", str(tmp_path)]) == 0
    assert "0 failures over 5 MILPs and 5 LPs" in capsys.readouterr().out
    frame = pd.read_csv(tmp_path / "validate_solver.csv")
    assert frame["kind"].tolist() == ["summary"]


def test_fast_charge_sweep_command(tmp_path):
    assert main(["sweep-fastcharge", "--budgets", "0", "1", *QUICK, "--output-dir", str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / "sweep_fast_charge.csv")
    assert frame["budget_hours"].tolist() == [0.0, 1.0]
    assert set(frame["status"]) == {"ok"}


def test_sizes_sweep_command(tmp_path):
    argv = ["sweep-sizes", "--presets", "A", "B", "--controllers", "mpc,baseline", *QUICK, "--output-dir", str(tmp_path)]
    assert main(argv) == 0
    frame = pd.read_csv(tmp_path / "sweep_sizes.csv")
    assert list(zip(frame["size"], frame["controller"])) == [("A", "mpc"), ("A", "baseline"), ("B", "mpc"), ("B", "baseline")]
    crossover = json.loads((tmp_path / "size_crossover.json").read_text(encoding="utf-8"))
    assert crossover["reference_size"] == "A"
    assert "baseline" in crossover


def test_gen_profile_command(tmp_path, capsys):
    assert main(["gen-profile", "--n-days", "1", "--output-dir", str(tmp_path)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["steps"] == 144
    assert (tmp_path / "profiles" / "secondary_profile.csv").exists()
