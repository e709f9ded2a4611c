"""
Closed-loop evaluation episodes and their logs.

An episode starts from the spawn hover with the arm straight down and feeds
one commanded pose per policy step. The log holds everything the metrics and
plots need, so reports can be recomputed from saved logs alone.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Protocol, Union

import numpy as np

from src.control.inner_loop import InnerLoopController, InnerLoopState
from src.dynamics.contact import BoxState, PushRig
from src.dynamics.model import DsamModel, end_effector_jacobian, forward_kinematics
from src.errors import ExportError
from src.geometry.se3 import Pose, euler_zyx_from_quat, yaw_rotmat
from src.models.config import RunConfig
from src.models.state import ExternalWrench, OuterCommand, SystemState
from src.policy.network import Policy
from src.policy.observation import build_observation
from src.training.env import advance_policy_step

logger = logging.getLogger(__name__)


# =============================================================================
# Controllers
# =============================================================================

class PoseController(Protocol):
    def command(self, state: SystemState, goal: Pose, model: DsamModel) -> OuterCommand:
        ...


class PolicyController:
    """Deterministic policy inference (mean action)."""

    def __init__(self, policy: Policy):
        self.policy = policy

    def command(self, state: SystemState, goal: Pose, model: DsamModel) -> OuterCommand:
        obs = build_observation(state, goal, model, self.policy.weights.observation)
        _, cmd = self.policy.act(obs)
        return cmd


class ScriptedPoseController:
    """
    PD position control of the base with the arm held straight down.

    The base is driven to the point that puts the gripper on the goal
    position for a level attitude at the goal's heading. Goals whose
    orientation is a pure yaw are therefore reached exactly.
    """

    def __init__(self, kp: float = 6.0, kd: float = 4.5, accel_max: float = 5.0):
        self.kp, self.kd, self.accel_max = kp, kd, accel_max

    def command(self, state: SystemState, goal: Pose, model: DsamModel) -> OuterCommand:
        yaw = euler_zyx_from_quat(goal.orientation)[..., 0]
        ee_offset = model.mount_offset + model.ee_com_distance * np.array([0.0, 0.0, -1.0])
        target = goal.position - np.einsum("...ij,...j->...i", yaw_rotmat(yaw), ee_offset)
        accel = self.kp * (target - state.p_b) - self.kd * state.v_b
        return OuterCommand(
            accel_des=np.clip(accel, -self.accel_max, self.accel_max),
            bodyrate_ff=np.zeros_like(accel),
            yaw_ref=np.asarray(yaw, dtype=float),
            joint_ref=np.zeros(np.shape(yaw) + (2,)),
        )


# =============================================================================
# Push contact
# =============================================================================

class PushContact:
    """PushRig bound to one simulated system; records the applied force."""

    def __init__(self, rig: PushRig):
        self.rig = rig
        self.box: BoxState = rig.initial_box()
        self.force = np.zeros(())

    def wrench(self, state: SystemState, model: DsamModel) -> ExternalWrench:
        ee = forward_kinematics(state, model)
        linear, _ = end_effector_jacobian(state, model)
        ee_velocity = np.einsum("...ij,...j->...i", linear, state.velocity)
        self.force = self.rig.contact_force(ee.position, ee_velocity, self.box)
        return self.rig.gripper_wrench(self.force)

    def advance(self, state: SystemState, model: DsamModel, dt: float) -> None:
        self.box = self.rig.step_box(self.box, self.force, dt)


# =============================================================================
# Logs
# =============================================================================

@dataclass
class EpisodeLog:
    """Per-policy-step time series of one episode (T rows, fewer after a crash)."""
    time: np.ndarray
    ee_position: np.ndarray
    ee_orientation: np.ndarray
    goal_position: np.ndarray
    goal_orientation: np.ndarray
    base_position: np.ndarray
    theta: np.ndarray
    joint_ref: np.ndarray
    box_position: np.ndarray
    crashed: bool = False
    goal_index: int = 0
    settle_steps: int = 0
    payload_mass: float = 0.0
    planned_steps: int = 0

    @property
    def num_steps(self) -> int:
        return self.time.shape[0]


_ARRAY_FIELDS = (
    "time", "ee_position", "ee_orientation", "goal_position", "goal_orientation",
    "base_position", "theta", "joint_ref", "box_position",
)


def run_episode(controller: PoseController, goals: Pose, config: RunConfig, model: DsamModel,
                rng: np.random.Generator, disturbance: Optional[PushContact] = None,
                goal_index: int = 0, settle_steps: int = 0, payload_mass: float = 0.0) -> EpisodeLog:
    """
    Simulate one episode commanding goals[k] at policy step k.

    A crash (divergence or altitude below the crash threshold) ends the
    episode; the log is truncated at the crash step.
    """
    num_steps = goals.position.shape[0]
    inner_controller = InnerLoopController.build(config.model, config.inner_loop,
                                                 config.simulation.inner_rate_hz)
    hover = config.model.hover_rotor_speed
    state = SystemState.at_rest(config.episode.spawn_position, hover)
    inner = InnerLoopState.initial((), hover)
    dt = config.simulation.policy_dt

    rows = {name: [] for name in _ARRAY_FIELDS}
    crashed = False
    for k in range(num_steps):
        goal = goals[k]
        cmd = controller.command(state, goal, model)
        outcome = advance_policy_step(state, inner, cmd, inner_controller, model, config,
                                      noise_rngs=[rng], disturbance=disturbance)
        state, inner = outcome.state, outcome.inner
        if bool(outcome.diverged) or state.p_b[2] < config.episode.crash_altitude:
            crashed = True
            logger.warning("episode %d crashed at t=%.2fs", goal_index, (k + 1) * dt)
            break

        ee = forward_kinematics(state, model)
        rows["time"].append((k + 1) * dt)
        rows["ee_position"].append(ee.position)
        rows["ee_orientation"].append(ee.orientation)
        rows["goal_position"].append(goal.position)
        rows["goal_orientation"].append(goal.orientation)
        rows["base_position"].append(state.p_b)
        rows["theta"].append(state.theta)
        rows["joint_ref"].append(cmd.joint_ref)
        rows["box_position"].append(disturbance.box.position if disturbance is not None else np.nan)

    widths = {"time": (), "ee_position": (3,), "ee_orientation": (4,), "goal_position": (3,),
              "goal_orientation": (4,), "base_position": (3,), "theta": (2,), "joint_ref": (2,),
              "box_position": ()}
    arrays = {
        name: np.array(values, dtype=float).reshape((len(values),) + widths[name])
        for name, values in rows.items()
    }
    return EpisodeLog(**arrays, crashed=crashed, goal_index=goal_index, settle_steps=settle_steps,
                      payload_mass=payload_mass, planned_steps=num_steps)


# =============================================================================
# Persistence
# =============================================================================

@dataclass
class EpisodeArchive:
    """Episode logs of one benchmark plus what the report needs besides them."""
    task: str
    logs: List[EpisodeLog]
    meta: dict = field(default_factory=dict)


def save_episode_logs(archive: EpisodeArchive, path: Union[str, Path]) -> Path:
    path = Path(path)
    arrays = {"meta_json": np.array(json.dumps({"task": archive.task, **archive.meta}, sort_keys=True))}
    for i, log in enumerate(archive.logs):
        for name in _ARRAY_FIELDS:
            arrays[f"ep{i:04d}_{name}"] = getattr(log, name)
        arrays[f"ep{i:04d}_scalars"] = np.array(
            [float(log.crashed), log.goal_index, log.settle_steps, log.payload_mass, log.planned_steps],
            dtype=float,
        )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as handle:
            np.savez(handle, **arrays)
    except OSError as exc:
        raise ExportError(f"cannot write episode logs: {exc}", str(path)) from exc
    return path


def load_episode_logs(path: Union[str, Path]) -> EpisodeArchive:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta_json"]))
            count = len([key for key in data.files if key.endswith("_scalars")])
            logs = []
            for i in range(count):
                crashed, goal_index, settle, payload, planned = data[f"ep{i:04d}_scalars"]
                logs.append(EpisodeLog(
                    **{name: data[f"ep{i:04d}_{name}"] for name in _ARRAY_FIELDS},
                    crashed=bool(crashed), goal_index=int(goal_index), settle_steps=int(settle),
                    payload_mass=float(payload), planned_steps=int(planned),
                ))
    except (OSError, KeyError, ValueError) as exc:
        raise ExportError(f"cannot read episode logs: {exc}", str(path)) from exc
    task = meta.pop("task")
    return EpisodeArchive(task=task, logs=logs, meta=meta)
