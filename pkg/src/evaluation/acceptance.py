"""
Acceptance checks for desk-scale runs.

Two kinds of check, both reported as one table (ACCEPTANCE_COLUMNS):
    directional  paired comparison of final curve values between ablation variants
    pose         limits on the pose benchmark of a trained policy

A check whose inputs are missing (variant failed or was not selected) is
reported with NaN values and counts as failed.
"""
import logging
import math
import operator
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import pandas as pd

from src.evaluation.ablation import final_metric
from src.models.results import MetricsReport

logger = logging.getLogger(__name__)

ACCEPTANCE_COLUMNS = ["check", "value", "relation", "bound", "passed"]

_RELATIONS = {">=": operator.ge, ">": operator.gt, "<=": operator.le}


@dataclass(frozen=True)
class DirectionalCheck:
    """`subject`'s final `metric` must stand in `relation` to `baseline`'s."""
    subject: str
    baseline: str
    metric: str
    relation: str

    @property
    def label(self) -> str:
        return f"{self.subject} {self.metric} {self.relation} {self.baseline} {self.metric}"


DIRECTIONAL_CHECKS = (
    # Joint positions in the observation raise the orientation reward
    DirectionalCheck(subject="full", baseline="no_joint_positions", metric="r_ori", relation=">="),
    # Without friction randomization the joint references oscillate more
    DirectionalCheck(subject="no_friction_dr", baseline="full", metric="joint_oscillation", relation=">"),
)


def _row(check: str, value: float, relation: str, bound: float) -> dict:
    passed = not (math.isnan(value) or math.isnan(bound)) and bool(_RELATIONS[relation](value, bound))
    return {"check": check, "value": value, "relation": relation, "bound": bound, "passed": passed}


def directional_checks(curves: pd.DataFrame, checks: Sequence[DirectionalCheck] = DIRECTIONAL_CHECKS,
                       last_rows: int = 5) -> pd.DataFrame:
    """Evaluate paired comparisons on the ablation curves (means over each variant's last rows)."""
    rows = []
    for check in checks:
        final = final_metric(curves, check.metric, last_rows) if not curves.empty else pd.Series(dtype=float)
        value = float(final.get(check.subject, math.nan))
        bound = float(final.get(check.baseline, math.nan))
        rows.append(_row(check.label, value, check.relation, bound))
        logger.info("%s: %.6g vs %.6g -> %s", check.label, value, bound,
                    "pass" if rows[-1]["passed"] else "FAIL")
    return pd.DataFrame(rows, columns=ACCEPTANCE_COLUMNS)


def pose_acceptance(report: MetricsReport, max_position_error_m: float = 0.25,
                    max_orientation_error_deg: float = 25.0, min_success_rate: float = 0.7) -> pd.DataFrame:
    """Limits on the pose benchmark of a desk-trained policy."""
    success_rate = report.success_count / report.goal_count if report.goal_count else math.nan
    rows = [
        _row("position_error_mean", report.position_error_mean, "<=", max_position_error_m),
        _row("orientation_error_mean_deg", report.orientation_error_mean_deg, "<=", max_orientation_error_deg),
        _row("success_rate", success_rate, ">=", min_success_rate),
    ]
    return pd.DataFrame(rows, columns=ACCEPTANCE_COLUMNS)


def write_checks(checks: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    checks.to_csv(path, index=False, float_format="%.9g")
    return path


def print_checks(checks: pd.DataFrame) -> None:
    for row in checks.itertuples(index=False):
        icon = "✅" if row.passed else "❌"
        print(f"   {icon} {row.check}: {row.value:.5g} {row.relation} {row.bound:.5g}")
