"""
Benchmark metrics as pure functions of episode logs.

Reports are recomputed from saved logs by the export command, so nothing here
may depend on state outside the logs and the scoring parameters.
"""
import math
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np

from src.evaluation.episodes import EpisodeLog
from src.geometry.se3 import geodesic_angle
from src.models.results import GoalResult, MetricsReport

Scoring = Literal["window", "path"]

# Flight results the simulated numbers are printed next to; never compared against.
HARDWARE_REFERENCE: List[Dict[str, object]] = [
    {"task": "pose", "condition": "0 g", "payload_mass": 0.0, "position_error_mean": 0.0536,
     "orientation_error_mean_deg": 8.8078, "success": "10/10"},
    {"task": "payload", "condition": "50 g", "payload_mass": 0.05, "position_error_mean": 0.0995,
     "orientation_error_mean_deg": 12.5041, "success": "7/7"},
    {"task": "payload", "condition": "140 g", "payload_mass": 0.14, "position_error_mean": 0.0954,
     "orientation_error_mean_deg": 15.7047, "success": "7/7"},
    {"task": "path", "condition": "figure-8", "position_rmse": 0.8167, "orientation_rmse_deg": 14.3915},
    {"task": "path", "condition": "line", "position_rmse": 0.1960, "orientation_rmse_deg": 5.5607},
    {"task": "push", "condition": "590 g box", "box_mass": 0.590, "box_displacement": 0.30},
]


def hardware_reference(task: str) -> List[Dict[str, object]]:
    """Reference rows for one task (payload also shows the 0 g row)."""
    tasks = {"payload": ("pose", "payload")}.get(task, (task,))
    return [row for row in HARDWARE_REFERENCE if row["task"] in tasks]


# =============================================================================
# Per-step errors
# =============================================================================

def position_errors(log: EpisodeLog) -> np.ndarray:
    return np.linalg.norm(log.ee_position - log.goal_position, axis=-1)


def orientation_errors_deg(log: EpisodeLog) -> np.ndarray:
    return np.rad2deg(geodesic_angle(log.ee_orientation, log.goal_orientation))


def scored_rows(log: EpisodeLog, scoring: Scoring, window_steps: int) -> slice:
    """Rows a metric is computed over: the final window, or everything after settling."""
    if scoring == "path":
        return slice(log.settle_steps, log.num_steps)
    return slice(max(log.num_steps - window_steps, 0), log.num_steps)


def rmse(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan
    return float(np.sqrt(np.mean(values ** 2)))


def joint_oscillation(log: EpisodeLog) -> float:
    """Mean |Δ joint reference| per policy step, averaged over both joints."""
    if log.num_steps < 2:
        return 0.0
    return float(np.mean(np.abs(np.diff(log.joint_ref, axis=0))))


def box_displacement(log: EpisodeLog) -> float:
    """Box travel over the episode; NaN when the episode had no box."""
    if log.num_steps == 0 or not np.all(np.isfinite(log.box_position[[0, -1]])):
        return math.nan
    return float(log.box_position[-1] - log.box_position[0])


# =============================================================================
# Results
# =============================================================================

def is_success(position_error: float, orientation_error_deg: float,
               position_threshold_m: float, orientation_threshold_deg: float) -> bool:
    # NaN (crashed) compares False
    return bool(position_error < position_threshold_m and orientation_error_deg < orientation_threshold_deg)


def goal_result(log: EpisodeLog, scoring: Scoring, window_steps: int,
                position_threshold_m: float, orientation_threshold_deg: float) -> GoalResult:
    """
    Score one episode.

    A crashed episode has NaN errors and is never a success; its joint
    oscillation and box displacement still cover the steps that ran.
    """
    goal_position = log.goal_position[-1] if log.num_steps else np.full(3, np.nan)
    goal_orientation = log.goal_orientation[-1] if log.num_steps else np.full(4, np.nan)
    rows = scored_rows(log, scoring, window_steps)
    position = position_errors(log)[rows]
    orientation = orientation_errors_deg(log)[rows]

    if log.crashed or position.size == 0:
        stats = dict(position_error_mean=math.nan, position_error_std=math.nan,
                     orientation_error_mean_deg=math.nan, orientation_error_std_deg=math.nan,
                     position_rmse=math.nan, orientation_rmse_deg=math.nan)
    else:
        stats = dict(
            position_error_mean=float(np.mean(position)),
            position_error_std=float(np.std(position)),
            orientation_error_mean_deg=float(np.mean(orientation)),
            orientation_error_std_deg=float(np.std(orientation)),
            position_rmse=rmse(position),
            orientation_rmse_deg=rmse(orientation),
        )

    return GoalResult(
        goal_index=log.goal_index,
        goal_x=float(goal_position[0]), goal_y=float(goal_position[1]), goal_z=float(goal_position[2]),
        goal_qw=float(goal_orientation[0]), goal_qx=float(goal_orientation[1]),
        goal_qy=float(goal_orientation[2]), goal_qz=float(goal_orientation[3]),
        payload_mass=log.payload_mass,
        steps=log.num_steps,
        crashed=log.crashed,
        success=(not log.crashed) and is_success(stats["position_error_mean"],
                                                 stats["orientation_error_mean_deg"],
                                                 position_threshold_m, orientation_threshold_deg),
        joint_oscillation=joint_oscillation(log),
        box_displacement=box_displacement(log),
        **stats,
    )


def count_successes(results: Sequence[GoalResult], position_threshold_m: float,
                    orientation_threshold_deg: float) -> int:
    """Re-score stored results against other thresholds."""
    return sum(
        (not r.crashed) and is_success(r.position_error_mean, r.orientation_error_mean_deg,
                                       position_threshold_m, orientation_threshold_deg)
        for r in results
    )


def _nanmean(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    return float(np.mean(values)) if values.size else math.nan


def build_report(task: str, logs: Sequence[EpisodeLog], *, seed: int, scoring: Scoring,
                 window_s: float, rate_hz: float, position_threshold_m: float,
                 orientation_threshold_deg: float, payload_mass: float = 0.0,
                 inference_latency_ms: Optional[float] = None) -> MetricsReport:
    """
    Aggregate a benchmark from its logs.

    Aggregate mean/std pool the scored samples of all goals that did not
    crash; RMSE, oscillation and displacement average the per-goal values.
    """
    window_steps = int(round(window_s * rate_hz))
    goals = [goal_result(log, scoring, window_steps, position_threshold_m, orientation_threshold_deg)
             for log in logs]

    survivors = [log for log in logs if not log.crashed and log.num_steps > 0]
    if survivors:
        position = np.concatenate([position_errors(log)[scored_rows(log, scoring, window_steps)]
                                   for log in survivors])
        orientation = np.concatenate([orientation_errors_deg(log)[scored_rows(log, scoring, window_steps)]
                                      for log in survivors])
    else:
        position = orientation = np.zeros(0)
    pooled = position.size > 0

    return MetricsReport(
        task=task,
        seed=seed,
        goal_count=len(goals),
        success_count=sum(g.success for g in goals),
        crashed_count=sum(g.crashed for g in goals),
        payload_mass=payload_mass,
        position_threshold_m=position_threshold_m,
        orientation_threshold_deg=orientation_threshold_deg,
        window_s=window_s,
        position_error_mean=float(np.mean(position)) if pooled else math.nan,
        position_error_std=float(np.std(position)) if pooled else math.nan,
        orientation_error_mean_deg=float(np.mean(orientation)) if pooled else math.nan,
        orientation_error_std_deg=float(np.std(orientation)) if pooled else math.nan,
        position_rmse=_nanmean([g.position_rmse for g in goals]),
        orientation_rmse_deg=_nanmean([g.orientation_rmse_deg for g in goals]),
        joint_oscillation=_nanmean([g.joint_oscillation for g in goals]),
        box_displacement=_nanmean([g.box_displacement for g in goals]),
        inference_latency_ms=math.nan if inference_latency_ms is None else float(inference_latency_ms),
        goals=goals,
    )
