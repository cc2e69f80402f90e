"""Experiment presets built on ``run_scenario``.

Every sweep expands into independent cells; cells may run in a process pool
and rows always come back in the configured order.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from pv_resiliency.errors import ConfigurationError
from pv_resiliency.metrics import daily_fast_charge_hours, report_row
from pv_resiliency.output import write_trace_csv
from pv_resiliency.scenario import CONTROLLERS, SIZE_PRESETS, ScenarioConfig, run_scenario

logger = logging.getLogger(__name__)

HORIZONS_HOURS = (1, 3, 6, 12, 24)
FAST_CHARGE_BUDGETS = (0, 1, 2, 3, 4, 5, 6)
HOUSE_MODELS = ("trace", "rc")
PRESET_LABELS = tuple(SIZE_PRESETS)


def _cell_name(labels):
    return "_".join(f"{key}-{value}" for key, value in labels.items())


def _run_cell(cell):
    labels, cfg, trace_dir = cell
    row = dict(labels)
    try:
        trace, report = run_scenario(cfg)
        row.update(report_row(report))
        row["max_daily_fast_charge_hours"] = max(daily_fast_charge_hours(trace).values(), default=0.0)
        if trace_dir is not None:
            write_trace_csv(trace, Path(trace_dir) / f"trace_{_cell_name(labels)}.csv")
        row["status"] = "ok"
        row["error"] = ""
    except Exception as e:
        logger.error(f"Sweep cell {labels} failed: {e}")
        row["status"] = "failed"
        row["error"] = str(e)
    return row


def run_cells(cells, workers=1):
    """Runs (labels, ScenarioConfig, trace_dir) cells; one row per cell in input order."""
    logger.info(f"Running {len(cells)} sweep cells with {workers} worker(s)")
    if workers <= 1:
        return [_run_cell(cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, cells))


def sweep_sizes(base: ScenarioConfig, presets=PRESET_LABELS, controllers=CONTROLLERS, workers=1, trace_dir=None):
    cells = []
    for label in presets:
        if label not in SIZE_PRESETS:
            raise ConfigurationError(f"Unknown size preset '{label}'")
        preset = SIZE_PRESETS[label]
        for controller in controllers:
            labels = {
                "size": label,
                "n_pv": preset.n_pv,
                "battery_units": preset.battery_units,
                "cost_usd": preset.cost_usd(base.system),
                "controller": controller,
            }
            cells.append((labels, base.with_overrides(size=label, controller=controller), trace_dir))
    return run_cells(cells, workers)


def horizon_steps(hours, dt_hours):
    steps = hours / dt_hours
    if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
        raise ConfigurationError(f"Horizon of {hours} h is not a whole number of {dt_hours} h steps")
    return int(round(steps))


def sweep_horizon(base: ScenarioConfig, horizons_hours=HORIZONS_HOURS, controllers=("mpc", "rule_based"), workers=1, trace_dir=None):
    cells = []
    for hours in horizons_hours:
        n = horizon_steps(hours, base.dt_hours)
        for controller in controllers:
            cfg = base.with_overrides(
                controller=controller,
                mpc=replace(base.mpc, n_steps=n),
                rule_based=replace(base.rule_based, n_steps=n),
            )
            cells.append(({"horizon_hours": hours, "n_steps": n, "controller": controller}, cfg, trace_dir))
    return run_cells(cells, workers)


def sweep_fast_charge(base: ScenarioConfig, budgets=FAST_CHARGE_BUDGETS, workers=1, trace_dir=None):
    cells = []
    for budget in budgets:
        cfg = base.with_overrides(controller="rule_based", rule_based=replace(base.rule_based, fast_charge_budget_hours=float(budget)))
        cells.append(({"budget_hours": budget, "controller": "rule_based"}, cfg, trace_dir))
    return run_cells(cells, workers)


def compare_house_models(base: ScenarioConfig, models=HOUSE_MODELS, controllers=("mpc",), workers=1, trace_dir=None):
    cells = []
    for model in models:
        for controller in controllers:
            cfg = base.with_overrides(house_model=model, controller=controller)
            cells.append(({"house_model": model, "controller": controller}, cfg, trace_dir))
    return run_cells(cells, workers)


def size_crossover(rows, reference_controller="mpc", reference_size="A", tol=1e-9):
    """First preset at which each other controller reaches the reference PRM.

    ``presets_larger`` counts presets past the reference size, None when never reached.
    """
    ok = [row for row in rows if row.get("status") == "ok"]
    order = list(SIZE_PRESETS)
    reference = next((row for row in ok if row["controller"] == reference_controller and row["size"] == reference_size), None)
    if reference is None:
        raise ConfigurationError(f"No successful {reference_controller} row for size {reference_size}")
    result = {"reference_controller": reference_controller, "reference_size": reference_size, "reference_prm": reference["prm"]}
    for controller in sorted({row["controller"] for row in ok} - {reference_controller}):
        candidates = sorted((row for row in ok if row["controller"] == controller), key=lambda row: order.index(row["size"]))
        hit = next((row for row in candidates if row["prm"] >= reference["prm"] - tol), None)
        result[controller] = {
            "size": hit["size"] if hit else None,
            "cost_usd": hit["cost_usd"] if hit else None,
            "presets_larger": order.index(hit["size"]) - order.index(reference_size) if hit else None,
        }
    return result
