import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from pv_resiliency import __version__
from pv_resiliency.errors import ConfigurationError, ResiliencyError
from pv_resiliency.milp import SolverLimits
from pv_resiliency.milp.validation import validate_solver
from pv_resiliency.output import write_figure_data, write_rows_csv, write_run_outputs
from pv_resiliency.scenario import CONTROLLERS, SIZE_PRESETS, ScenarioConfig, generate_profiles, parse_start, run_scenario
from pv_resiliency.sweeps import (
    FAST_CHARGE_BUDGETS,
    HORIZONS_HOURS,
    HOUSE_MODELS,
    compare_house_models,
    horizon_steps,
    size_crossover,
    sweep_fast_charge,
    sweep_horizon,
    sweep_sizes,
)
from pv_resiliency.weather import ColumnSchema, ForecastMode

logger = logging.getLogger(__name__)

EXIT_ERROR = 1
EXIT_CONFIG = 2


def _scenario_flags():
    parent = argparse.ArgumentParser(add_help=False)
    group = parent.add_argument_group("scenario")
    group.add_argument("--config", help="YAML configuration file (default: the packaged config.yaml)")
    group.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    group.add_argument("--controller", choices=[*CONTROLLERS, "all"], help="Controller to simulate")
    group.add_argument("--size", choices=list(SIZE_PRESETS), help="System size preset")
    group.add_argument("--start", help="Simulation start, e.g. 2017-09-10T00:00")
    group.add_argument("--days", type=float, dest="duration_days", help="Simulated days")
    group.add_argument("--dt-minutes", type=float, help="Control step in minutes")
    group.add_argument("--horizon-hours", type=float, help="MPC and Rule-Based planning horizon in hours")
    group.add_argument("--fast-charge-budget", type=float, help="Rule-Based fast-charge hours per day")
    group.add_argument("--weather", action="append", help="Weather CSV (repeatable); omitted means the bundled storm week")
    group.add_argument("--weather-format", choices=["generic", "nsrdb"], help="Column layout of the weather CSV")
    group.add_argument("--historical", help="Directory of doy_*.csv profiles or a weather CSV to average")
    group.add_argument("--e-bat-initial", type=float, help="Initial battery energy in Wh (default: full)")
    group.add_argument("--t-fr-initial", type=float, help="Initial fridge temperature in degC")
    group.add_argument("--house-model", choices=["trace", "rc", "state_space"])
    group.add_argument("--house-param", action="append", default=[], metavar="KEY=VALUE", help="House model parameter (repeatable)")
    group.add_argument("--forecast-mode", choices=[mode.value for mode in ForecastMode])
    group.add_argument("--forecast-seed", type=int)
    group.add_argument("--forecast-sigma", type=float)
    group.add_argument("--node-limit", type=int, help="Branch and bound node cap per solve")
    group.add_argument("--time-limit", type=float, help="Seconds per solve")
    group.add_argument("--output-dir", help="Directory for traces, reports and sweep CSVs")
    group.add_argument("--dump-lp", metavar="DIR", help="Write every MPC problem in LP format to DIR")
    return parent


def _house_params(pairs):
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigurationError(f"--house-param expects KEY=VALUE, got '{pair}'")
        try:
            params[key.strip()] = float(value)
        except ValueError as e:
            raise ConfigurationError(f"--house-param {key} is not a number: {value}") from e
    return params


def scenario_from_args(args):
    """Configuration document first, then every given flag on top."""
    cfg = ScenarioConfig.load(args.config)
    changes = {}
    for name in ("size", "duration_days", "e_bat_initial", "t_fr_initial", "house_model", "forecast_seed", "forecast_sigma", "output_dir"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if args.controller and args.controller != "all":
        changes["controller"] = args.controller
    if args.start:
        changes["start"] = parse_start(args.start)
    if args.dt_minutes:
        changes["dt_hours"] = args.dt_minutes / 60.0
    if args.weather:
        changes["weather_files"] = tuple(args.weather)
    if args.weather_format:
        changes["weather_schema"] = ColumnSchema.from_dict({"format": args.weather_format, "timezone": cfg.weather_schema.timezone})
    if args.historical:
        changes["historical_source"] = args.historical
    if args.house_param:
        changes["house_params"] = tuple(sorted(_house_params(args.house_param).items()))
    if args.forecast_mode:
        changes["forecast_mode"] = ForecastMode(args.forecast_mode)
    if args.dump_lp:
        changes["dump_lp_dir"] = args.dump_lp
    if args.node_limit or args.time_limit:
        changes["solver"] = SolverLimits(
            node_limit=args.node_limit or cfg.solver.node_limit,
            time_limit=args.time_limit or cfg.solver.time_limit,
        )
    cfg = cfg.with_overrides(**changes)
    if args.horizon_hours:
        n = horizon_steps(args.horizon_hours, cfg.dt_hours)
        cfg = cfg.with_overrides(mpc=replace(cfg.mpc, n_steps=n), rule_based=replace(cfg.rule_based, n_steps=n))
    if args.fast_charge_budget is not None:
        cfg = cfg.with_overrides(rule_based=replace(cfg.rule_based, fast_charge_budget_hours=args.fast_charge_budget))
    return cfg


def cmd_run(args, cfg: ScenarioConfig):
    controllers = CONTROLLERS if args.controller == "all" else (cfg.controller,)
    output_dir = Path(cfg.output_dir)
    traces = []
    for controller in controllers:
        trace, report = run_scenario(cfg.with_overrides(controller=controller))
        write_run_outputs(trace, report, output_dir)
        traces.append(trace)
        print(f"{report.controller}: PRM={report.prm:.2f} h/day SRM={report.srm:.2f}% solver_success={report.solver_success_pct:.1f}%")
    if args.figures:
        write_figure_data(traces, cfg.plant_system, output_dir)
    return 0


def _finish_sweep(rows, path):
    write_rows_csv(rows, path)
    failed = sum(row["status"] != "ok" for row in rows)
    print(f"{len(rows)} cells written to {path} ({failed} failed)")
    return EXIT_ERROR if failed else 0


def cmd_sweep_sizes(args, cfg: ScenarioConfig):
    controllers = tuple(args.controllers.split(",")) if args.controllers else CONTROLLERS
    rows = sweep_sizes(cfg, presets=tuple(args.presets), controllers=controllers, workers=args.workers, trace_dir=args.trace_dir)
    status = _finish_sweep(rows, Path(cfg.output_dir) / "sweep_sizes.csv")
    try:
        crossover = size_crossover(rows)
    except ConfigurationError as e:
        logger.warning(f"No size crossover reported: {e}")
        return status
    path = Path(cfg.output_dir) / "size_crossover.json"
    path.write_text(json.dumps(crossover, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(crossover, indent=2))
    return status


def cmd_sweep_horizon(args, cfg: ScenarioConfig):
    controllers = tuple(args.controllers.split(",")) if args.controllers else ("mpc", "rule_based")
    rows = sweep_horizon(cfg, horizons_hours=tuple(args.horizons), controllers=controllers, workers=args.workers, trace_dir=args.trace_dir)
    return _finish_sweep(rows, Path(cfg.output_dir) / "sweep_horizon.csv")


def cmd_sweep_fast_charge(args, cfg: ScenarioConfig):
    rows = sweep_fast_charge(cfg, budgets=tuple(args.budgets), workers=args.workers, trace_dir=args.trace_dir)
    return _finish_sweep(rows, Path(cfg.output_dir) / "sweep_fast_charge.csv")


def cmd_compare_house_models(args, cfg: ScenarioConfig):
    rows = compare_house_models(cfg, models=tuple(args.models), workers=args.workers, trace_dir=args.trace_dir)
    return _finish_sweep(rows, Path(cfg.output_dir) / "compare_house_models.csv")


def cmd_validate_solver(args, cfg: ScenarioConfig):
    summary, failures = validate_solver(n_milp=args.n_milp, n_lp=args.n_lp, seed=args.seed, max_binary=args.max_binary)
    path = Path(cfg.output_dir) / "validate_solver.csv"
    write_rows_csv([{**summary, "kind": "summary"}, *failures], path)
    print(f"{summary['failures']} failures over {summary['milp_instances']} MILPs and {summary['lp_instances']} LPs ({summary['elapsed_s']:.1f}s)")
    return EXIT_ERROR if failures else 0


def cmd_gen_profile(args, cfg: ScenarioConfig):
    result = generate_profiles(cfg, Path(cfg.output_dir) / "profiles", n_days=args.n_days)
    print(json.dumps(result, indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="pv-resiliency", description="Closed-loop PV+battery resiliency simulator for grid outages")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    flags = _scenario_flags()

    run = sub.add_parser("run", parents=[flags], help="Simulate one scenario (or all controllers with --controller all)")
    run.add_argument("--figures", action="store_true", help="Also write gnuplot data files")
    run.set_defaults(handler=cmd_run)

    def sweep_parser(name, handler, help_text):
        sweep = sub.add_parser(name, parents=[flags], help=help_text)
        sweep.add_argument("--workers", type=int, default=1, help="Worker processes for independent cells")
        sweep.add_argument("--trace-dir", help="Also write one trace CSV per cell into this directory")
        sweep.set_defaults(handler=handler)
        return sweep

    sizes = sweep_parser("sweep-sizes", cmd_sweep_sizes, "Every controller over size presets A-F")
    sizes.add_argument("--presets", nargs="+", default=list(SIZE_PRESETS), choices=list(SIZE_PRESETS))
    sizes.add_argument("--controllers", help="Comma separated controllers (default: all)")
    horizon = sweep_parser("sweep-horizon", cmd_sweep_horizon, "MPC and Rule-Based over planning horizons")
    horizon.add_argument("--horizons", nargs="+", type=float, default=list(HORIZONS_HOURS), help="Horizons in hours")
    horizon.add_argument("--controllers", help="Comma separated controllers (default: mpc,rule_based)")
    fast = sweep_parser("sweep-fastcharge", cmd_sweep_fast_charge, "Rule-Based over daily fast-charge budgets")
    fast.add_argument("--budgets", nargs="+", type=float, default=list(FAST_CHARGE_BUDGETS), help="Budgets in hours per day")
    house = sweep_parser("compare-house-models", cmd_compare_house_models, "MPC against different plant house models")
    house.add_argument("--models", nargs="+", default=list(HOUSE_MODELS), choices=["trace", "rc", "state_space"])

    validate = sub.add_parser("validate-solver", parents=[flags], help="Check the embedded solver on random instances")
    validate.add_argument("--n-milp", type=int, default=500)
    validate.add_argument("--n-lp", type=int, default=200)
    validate.add_argument("--seed", type=int, default=0)
    validate.add_argument("--max-binary", type=int, default=10)
    validate.set_defaults(handler=cmd_validate_solver)

    profile = sub.add_parser("gen-profile", parents=[flags], help="Write secondary load and historical temperature profiles")
    profile.add_argument("--n-days", type=float, help="Days of secondary profile (default: scenario duration)")
    profile.set_defaults(handler=cmd_gen_profile)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = scenario_from_args(args)
        return args.handler(args, cfg)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (ResiliencyError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
