import logging
from pathlib import Path

import pandas as pd

from pv_resiliency.metrics import RunTrace, write_report_json, write_report_text
from pv_resiliency.plant.system import SystemConfig

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.6f"


def _target(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_trace_csv(trace: RunTrace, path):
    """Per-step trace; solve times are left out so reruns are byte-identical."""
    path = _target(path)
    trace.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(trace)} trace rows to {path}")
    return path


def write_rows_csv(rows, path, columns=None):
    path = _target(path)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def _write_block(handle, frame, header):
    handle.write(f"# {header}\n")
    frame.to_csv(handle, sep=" ", index=False, header=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_figure_data(traces, system: SystemConfig, directory):
    """Gnuplot data files; each run is its own index block, selected with ``index``."""
    directory = Path(directory)
    temp_soc = _target(directory / "fig_temperature_soc.dat")
    secondary = _target(directory / "fig_secondary.dat")
    with open(temp_soc, "w", encoding="utf-8") as soc_handle, open(secondary, "w", encoding="utf-8") as sec_handle:
        for i, trace in enumerate(traces):
            frame = trace.to_frame()
            # states are end-of-step
            hours = (frame["step"] + 1) * trace.dt_hours
            if i:
                soc_handle.write("\n\n")
                sec_handle.write("\n\n")
            soc = pd.DataFrame({"hour": hours, "t_fr": frame["t_fr"], "soc_pct": 100.0 * frame["e_bat"] / system.e_bat_max})
            _write_block(soc_handle, soc, f"{trace.controller}: hour t_fr soc_pct")
            served = pd.DataFrame({"hour": hours, "e_s_desired": frame["e_s_desired"], "e_s_served": frame["e_s_served"]})
            _write_block(sec_handle, served, f"{trace.controller}: hour e_s_desired e_s_served")
    logger.info(f"Wrote figure data for {len(traces)} runs to {directory}")
    return [temp_soc, secondary]


def write_run_outputs(trace: RunTrace, report, directory):
    directory = Path(directory)
    return [
        write_trace_csv(trace, directory / f"trace_{trace.controller}.csv"),
        write_report_json(report, directory / f"report_{trace.controller}.json"),
        write_report_text(report, directory / f"report_{trace.controller}.txt"),
    ]
