"""
Report and plot-data export.

CSV schemas are fixed (see docs/CSV_SCHEMAS.md). Floats are written with
'%.17g' so reading a report back gives the identical MetricsReport.
"""
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from src.errors import ExportError
from src.evaluation.episodes import EpisodeArchive, EpisodeLog
from src.evaluation.metrics import build_report, hardware_reference
from src.models.results import GoalResult, MetricsReport

logger = logging.getLogger(__name__)

GOAL_COLUMNS: List[str] = list(GoalResult.model_fields)
SUMMARY_FIELDS: List[str] = [name for name in MetricsReport.model_fields if name != "goals"]
SUMMARY_COLUMNS: List[str] = ["source", "condition", *SUMMARY_FIELDS, "reference_success", "box_mass"]
PLOT_COLUMNS: List[str] = [
    "time",
    "ee_x", "ee_y", "ee_z", "ee_qw", "ee_qx", "ee_qy", "ee_qz",
    "goal_x", "goal_y", "goal_z", "goal_qw", "goal_qx", "goal_qy", "goal_qz",
    "base_x", "base_y", "base_z",
    "theta_1", "theta_2", "joint_ref_1", "joint_ref_2",
    "box_x",
]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return "nan" if math.isnan(value) else format(value, ".17g")
    return str(value)


def _write(frame: pd.DataFrame, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.map(_cell).to_csv(path, index=False)
    except OSError as exc:
        raise ExportError(f"cannot write CSV: {exc}", str(path)) from exc
    return path


def _read(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ExportError(f"cannot read CSV: {exc}", str(path)) from exc


def report_paths(directory: Union[str, Path], task: str) -> Dict[str, Path]:
    directory = Path(directory)
    return {"goals": directory / f"{task}_goals.csv", "summary": directory / f"{task}_summary.csv"}


# =============================================================================
# Reports
# =============================================================================

def summary_frame(report: MetricsReport) -> pd.DataFrame:
    """Simulation row followed by the hardware reference rows of the same task."""
    rows = [{"source": "simulation", "condition": f"{report.payload_mass:g} kg", **report.summary_row()}]
    for reference in hardware_reference(report.task):
        row = {"source": "hardware", "condition": reference["condition"], "task": reference["task"]}
        for key, value in reference.items():
            if key == "success":
                row["reference_success"] = value
            elif key in SUMMARY_COLUMNS and key not in row:
                row[key] = value
        rows.append(row)
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS, dtype=object)


def export_report(report: MetricsReport, directory: Union[str, Path]) -> Dict[str, Path]:
    """Write <task>_goals.csv and <task>_summary.csv into directory."""
    paths = report_paths(directory, report.task)
    goals = pd.DataFrame([goal.model_dump() for goal in report.goals], columns=GOAL_COLUMNS, dtype=object)
    _write(goals, paths["goals"])
    _write(summary_frame(report), paths["summary"])
    logger.info("report %s written to %s", report.task, paths["summary"].parent)
    return paths


def read_report(directory: Union[str, Path], task: str) -> MetricsReport:
    """Parse the CSV pair written by export_report."""
    paths = report_paths(directory, task)
    goals = _read(paths["goals"])
    summary = _read(paths["summary"])
    if list(goals.columns) != GOAL_COLUMNS or list(summary.columns) != SUMMARY_COLUMNS:
        raise ExportError("CSV header does not match the report schema", str(paths["summary"].parent))
    simulated = summary[summary["source"] == "simulation"]
    if len(simulated) != 1:
        raise ExportError("summary must hold exactly one simulation row", str(paths["summary"]))
    row = simulated.iloc[0][SUMMARY_FIELDS].to_dict()
    try:
        return MetricsReport.model_validate({**row, "goals": goals.to_dict(orient="records")})
    except ValueError as exc:
        raise ExportError(f"invalid report: {exc}", str(paths["summary"])) from exc


def recompute_report(archive: EpisodeArchive) -> MetricsReport:
    """Rebuild a report from saved episode logs and their scoring parameters."""
    meta = archive.meta
    return build_report(
        archive.task, archive.logs, seed=meta["seed"], scoring=meta["scoring"], window_s=meta["window_s"],
        rate_hz=meta["rate_hz"], position_threshold_m=meta["position_threshold_m"],
        orientation_threshold_deg=meta["orientation_threshold_deg"], payload_mass=meta["payload_mass"],
        inference_latency_ms=meta.get("inference_latency_ms"),
    )


# =============================================================================
# Plot bundle
# =============================================================================

def episode_frame(log: EpisodeLog) -> pd.DataFrame:
    """One row per policy step, PLOT_COLUMNS order."""
    columns = np.column_stack([
        log.time, log.ee_position, log.ee_orientation, log.goal_position, log.goal_orientation,
        log.base_position, log.theta, log.joint_ref, log.box_position,
    ]) if log.num_steps else np.zeros((0, len(PLOT_COLUMNS)))
    return pd.DataFrame(columns, columns=PLOT_COLUMNS)


def plot_export(archive: EpisodeArchive, directory: Union[str, Path], html: bool = True) -> List[Path]:
    """
    Write one CSV per episode (<task>_ep0000.csv, ...) and, optionally, one
    plotly HTML page per episode with the gripper pose against the goal.
    """
    from src.ui.figures import trajectory_figure

    directory = Path(directory)
    written: List[Path] = []
    for i, log in enumerate(archive.logs):
        frame = episode_frame(log)
        written.append(_write(frame.astype(object), directory / f"{archive.task}_ep{i:04d}.csv"))
        if html:
            target = directory / f"{archive.task}_ep{i:04d}.html"
            try:
                trajectory_figure(frame, title=f"{archive.task} episode {i}").write_html(
                    target, include_plotlyjs="cdn")
            except OSError as exc:
                raise ExportError(f"cannot write figure: {exc}", str(target)) from exc
            written.append(target)
    logger.info("plot bundle: %d files in %s", len(written), directory)
    return written


def read_episode_frame(path: Union[str, Path]) -> pd.DataFrame:
    frame = _read(Path(path))
    if list(frame.columns) != PLOT_COLUMNS:
        raise ExportError("CSV header does not match the plot schema", str(path))
    return frame.astype(float)
