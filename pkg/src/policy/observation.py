"""
Observation assembly for the policy.

Block order (29 entries when every block is enabled):
    lin_vel_body (3), body_rate (3), rotation (9), joint_positions (2),
    goal_in_body (3), goal_in_ee (9)
The three optional blocks can be dropped for ablations; the remaining blocks
keep their relative order.
"""
from typing import Dict, List, Tuple

import numpy as np

from src.dynamics.model import DsamModel, forward_kinematics
from src.geometry.se3 import Pose, pose_in_frame, quat_to_rotmat, rotmat_6d_encode
from src.models.config import ObservationConfig
from src.models.state import SystemState

OBSERVATION_BLOCKS: Tuple[Tuple[str, int], ...] = (
    ("lin_vel_body", 3),
    ("body_rate", 3),
    ("rotation", 9),
    ("joint_positions", 2),
    ("goal_in_body", 3),
    ("goal_in_ee", 9),
)
FULL_OBSERVATION_DIM = sum(size for _, size in OBSERVATION_BLOCKS)

_OPTIONAL_BLOCKS = {
    "body_rate": "include_body_rate",
    "joint_positions": "include_joint_positions",
    "goal_in_body": "include_goal_in_body",
}


def observation_layout(config: ObservationConfig) -> List[Tuple[str, int]]:
    """Blocks present in the observation for this config, in order."""
    return [
        (name, size) for name, size in OBSERVATION_BLOCKS
        if name not in _OPTIONAL_BLOCKS or getattr(config, _OPTIONAL_BLOCKS[name])
    ]


def observation_dim(config: ObservationConfig) -> int:
    return sum(size for _, size in observation_layout(config))


def observation_mask(config: ObservationConfig) -> np.ndarray:
    """Boolean mask over the full 29-vector selecting the enabled entries."""
    kept = {name for name, _ in observation_layout(config)}
    return np.concatenate([
        np.full(size, name in kept) for name, size in OBSERVATION_BLOCKS
    ])


def observation_blocks(state: SystemState, goal: Pose, model: DsamModel) -> Dict[str, np.ndarray]:
    """Every observation block by name, before masking."""
    R = np.asarray(state.R_wb, dtype=float)
    R_t = np.swapaxes(R, -1, -2)
    ee = forward_kinematics(state, model)
    goal_in_ee = pose_in_frame(goal, ee)
    goal_offset = np.asarray(goal.position, dtype=float) - state.p_b
    return {
        "lin_vel_body": np.einsum("...ij,...j->...i", R_t, state.v_b),
        "body_rate": np.asarray(state.omega_b, dtype=float),
        "rotation": R.reshape(R.shape[:-2] + (9,)),
        "joint_positions": np.asarray(state.theta, dtype=float) / model.joint_limit,
        "goal_in_body": np.einsum("...ij,...j->...i", R_t, goal_offset),
        "goal_in_ee": np.concatenate([
            goal_in_ee.position,
            rotmat_6d_encode(quat_to_rotmat(goal_in_ee.orientation)),
        ], axis=-1),
    }


def build_observation(state: SystemState, goal: Pose, model: DsamModel,
                      config: ObservationConfig = ObservationConfig()) -> np.ndarray:
    """
    Assemble the policy observation.

    Args:
        state: system state, any batch shape
        goal: goal pose broadcastable against the state batch
        model: numeric model used for the gripper forward kinematics
        config: which optional blocks to include

    Returns:
        (..., observation_dim(config)) float64 array
    """
    blocks = observation_blocks(state, goal, model)
    batch = np.broadcast_shapes(blocks["lin_vel_body"].shape[:-1], blocks["goal_in_ee"].shape[:-1])
    return np.concatenate([
        np.broadcast_to(blocks[name], batch + (size,)) for name, size in observation_layout(config)
    ], axis=-1)
