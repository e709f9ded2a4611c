"""
Benchmark and ablation result models.

Floats that cannot be computed (a crashed goal, a task without a box) are NaN.
"""
import math
from typing import Any, Dict, List, Literal

from pydantic import BaseModel, ConfigDict, model_validator

Task = Literal["pose", "payload", "push", "path"]


class GoalResult(BaseModel):
    """Outcome of one benchmark episode."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    goal_index: int
    goal_x: float
    goal_y: float
    goal_z: float
    goal_qw: float
    goal_qx: float
    goal_qy: float
    goal_qz: float
    payload_mass: float
    steps: int
    crashed: bool
    success: bool
    position_error_mean: float
    position_error_std: float
    orientation_error_mean_deg: float
    orientation_error_std_deg: float
    position_rmse: float
    orientation_rmse_deg: float
    joint_oscillation: float
    box_displacement: float


class MetricsReport(BaseModel):
    """Aggregate over the goals of one benchmark run."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    task: Task
    seed: int
    goal_count: int
    success_count: int
    crashed_count: int
    payload_mass: float
    position_threshold_m: float
    orientation_threshold_deg: float
    window_s: float
    position_error_mean: float
    position_error_std: float
    orientation_error_mean_deg: float
    orientation_error_std_deg: float
    position_rmse: float
    orientation_rmse_deg: float
    joint_oscillation: float
    box_displacement: float
    inference_latency_ms: float
    goals: List[GoalResult]

    @model_validator(mode="after")
    def _consistent(self) -> "MetricsReport":
        if not 0 <= self.success_count <= self.goal_count:
            raise ValueError("success_count must lie in [0, goal_count]")
        if len(self.goals) != self.goal_count:
            raise ValueError("one GoalResult per goal required")
        for name in ("position_rmse", "orientation_rmse_deg"):
            value = getattr(self, name)
            if not math.isnan(value) and value < 0:
                raise ValueError(f"{name} must be >= 0")
        return self

    def summary_row(self) -> Dict[str, Any]:
        """Aggregate fields only, in schema order."""
        return self.model_dump(exclude={"goals"})


class AblationFailure(BaseModel):
    """A variant that did not finish training; the suite continues without it."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: str
    error_type: str
    message: str
    overrides: Dict[str, Any]
