"""
Five-term goal-reaching reward.

Each term is w_i * exp(-alpha_i * metric_i):
    r_pos   L2 distance gripper -> goal
    r_ori   geodesic angle between gripper and goal orientation
    r_ds    squared L2 change of the base action (yaw difference wrapped)
    r_js    L1 change of the joint action
    r_dmag  squared L2 magnitude of the base action
Actions are in physical units (after scale_actions).

Every term lies in (0, w_i], with one exception: the environment zeroes all
five terms for a system whose dynamics diverged during the step. That step
is also its terminal crash step.
"""
from dataclasses import dataclass

import numpy as np

from src.geometry.se3 import Pose, geodesic_angle, wrap_angle
from src.models.config import RewardWeights
from src.models.state import OuterCommand

REWARD_COMPONENTS = ("r_pos", "r_ori", "r_ds", "r_js", "r_dmag")


@dataclass(frozen=True, eq=False)
class RewardBreakdown:
    r_pos: np.ndarray
    r_ori: np.ndarray
    r_ds: np.ndarray
    r_js: np.ndarray
    r_dmag: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.r_pos + self.r_ori + self.r_ds + self.r_js + self.r_dmag

    def as_dict(self) -> dict:
        values = {name: getattr(self, name) for name in REWARD_COMPONENTS}
        values["total"] = self.total
        return values


def base_action_delta(prev_base: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Difference of two 7-dim base actions with the yaw entry wrapped to (-pi, pi]."""
    delta = np.asarray(base, dtype=float) - np.asarray(prev_base, dtype=float)
    return np.concatenate([delta[..., :6], wrap_angle(delta[..., 6:7])], axis=-1)


def compute_reward(prev_action: OuterCommand, action: OuterCommand, ee: Pose, goal: Pose,
                   weights: RewardWeights = RewardWeights()) -> RewardBreakdown:
    """
    Args:
        prev_action: command of the previous policy step (zeros after a reset)
        action: command of this policy step
        ee: gripper pose
        goal: goal pose
        weights: w and alpha per term
    """
    base, prev_base = action.base_action(), prev_action.base_action()
    joint, prev_joint = action.joint_action(), prev_action.joint_action()
    w, alpha = weights.weights, weights.alphas
    position_error = np.linalg.norm(np.asarray(ee.position) - np.asarray(goal.position), axis=-1)
    orientation_error = geodesic_angle(ee.orientation, goal.orientation)
    smoothness = np.sum(base_action_delta(prev_base, base) ** 2, axis=-1)
    joint_smoothness = np.sum(np.abs(np.asarray(joint) - np.asarray(prev_joint)), axis=-1)
    magnitude = np.sum(np.asarray(base, dtype=float) ** 2, axis=-1)
    return RewardBreakdown(
        r_pos=w[0] * np.exp(-alpha[0] * position_error),
        r_ori=w[1] * np.exp(-alpha[1] * orientation_error),
        r_ds=w[2] * np.exp(-alpha[2] * smoothness),
        r_js=w[3] * np.exp(-alpha[3] * joint_smoothness),
        r_dmag=w[4] * np.exp(-alpha[4] * magnitude),
    )
