"""
Commanded pose sequences for the path-following and pushing benchmarks.

Paths are sampled at the policy rate at constant end-effector speed and are
prefixed with a settle phase that holds the first pose. The settle phase is
excluded from path metrics.
"""
from dataclasses import dataclass

import numpy as np

from src.geometry.se3 import Pose, quat_from_euler_zyx
from src.models.config import PathSpec, PushRigConfig

_DENSE_SAMPLES = 4096


@dataclass(frozen=True)
class PathSamples:
    poses: Pose          # (T,) batch of commanded poses
    settle_steps: int

    @property
    def num_steps(self) -> int:
        return self.poses.position.shape[0]


def _orientation(rpy_deg) -> np.ndarray:
    roll, pitch, yaw = np.deg2rad(np.asarray(rpy_deg, dtype=float))
    return quat_from_euler_zyx(yaw, pitch, roll)


def lemniscate(t: np.ndarray, width: float, height: float) -> np.ndarray:
    """
    Planar figure-8 (lemniscate of Bernoulli) with the given extents, (..., 2).

    x spans [-width/2, width/2]; y spans [-height/2, height/2].
    """
    t = np.asarray(t, dtype=float)
    denominator = 1.0 + np.sin(t) ** 2
    x = 0.5 * width * np.cos(t) / denominator
    y = 0.5 * height * 2.0 * np.sqrt(2.0) * np.sin(t) * np.cos(t) / denominator
    return np.stack([x, y], axis=-1)


def _with_settle(positions: np.ndarray, orientation: np.ndarray, settle_steps: int) -> PathSamples:
    positions = np.concatenate([np.repeat(positions[:1], settle_steps, axis=0), positions])
    orientations = np.broadcast_to(orientation, (positions.shape[0], 4)).copy()
    return PathSamples(Pose(positions, orientations), settle_steps)


def figure8_path(spec: PathSpec, rate_hz: float) -> PathSamples:
    """Constant-speed figure-8 in the horizontal plane around spec.center, one period per lap."""
    dense_t = np.linspace(0.0, 2.0 * np.pi, _DENSE_SAMPLES + 1)
    dense = lemniscate(dense_t, spec.width, spec.height)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(dense, axis=0), axis=-1))])
    length = arc[-1]

    steps = int(round(spec.period_s * spec.laps * rate_hz))
    if length < 1e-12:
        planar = np.zeros((steps, 2))
    else:
        distance = np.mod(np.arange(steps) * (length / (spec.period_s * rate_hz)), length)
        t = np.interp(distance, arc, dense_t)
        planar = lemniscate(t, spec.width, spec.height)
    positions = np.asarray(spec.center, dtype=float) + np.concatenate([planar, np.zeros((steps, 1))], axis=-1)
    return _with_settle(positions, _orientation(spec.orientation_rpy_deg), int(round(spec.settle_s * rate_hz)))


def line_path(start, end, speed: float, rpy_deg, settle_s: float, rate_hz: float) -> PathSamples:
    """Straight segment traversed once at constant speed; at least one sample."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    length = float(np.linalg.norm(end - start))
    steps = max(1, int(round(length / speed * rate_hz)))
    fraction = np.minimum(np.arange(1, steps + 1) * speed / rate_hz / max(length, 1e-12), 1.0)
    positions = start + fraction[:, None] * (end - start)
    return _with_settle(positions, _orientation(rpy_deg), int(round(settle_s * rate_hz)))


def path_samples(spec: PathSpec, rate_hz: float) -> PathSamples:
    if spec.kind == "line":
        return line_path(spec.line_start, spec.line_end, spec.ee_speed, spec.orientation_rpy_deg,
                         spec.settle_s, rate_hz)
    return figure8_path(spec, rate_hz)


def push_path(rig: PushRigConfig, rate_hz: float) -> PathSamples:
    start = np.asarray(rig.start_position, dtype=float)
    end = start + np.array([rig.path_length, 0.0, 0.0])
    return line_path(start, end, rig.ee_speed, rig.orientation_rpy_deg, rig.settle_s, rate_hz)
