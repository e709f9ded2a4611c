"""
Numerical state containers passed between the simulator, inner loop and policy.

All fields are numpy arrays that share one leading batch shape; batch shape ()
is a single system. Containers are immutable, so every update returns a new one.
"""
import dataclasses
from dataclasses import dataclass
from typing import Tuple

import numpy as np


def _where(mask: np.ndarray, new: np.ndarray, old: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    expanded = mask.reshape(mask.shape + (1,) * (np.ndim(new) - mask.ndim))
    return np.where(expanded, new, old)


class _ArrayRecord:
    """Shared helpers for the frozen array dataclasses below."""

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def __getitem__(self, index):
        return type(self)(**{f.name: getattr(self, f.name)[index] for f in dataclasses.fields(self)})

    def merge(self, mask: np.ndarray, other):
        """Take fields from `other` where mask is True (used for partial resets)."""
        return type(self)(**{
            f.name: _where(mask, getattr(other, f.name), getattr(self, f.name))
            for f in dataclasses.fields(self)
        })

    @classmethod
    def stack(cls, records):
        return cls(**{
            f.name: np.stack([getattr(r, f.name) for r in records])
            for f in dataclasses.fields(cls)
        })


@dataclass(frozen=True, eq=False)
class SystemState(_ArrayRecord):
    """
    Configuration q = (p_b, R_wb, theta) and velocity v = (v_b, omega_b, theta_dot).

    v_b is expressed in the world frame, omega_b in the body frame.
    """
    p_b: np.ndarray
    R_wb: np.ndarray
    theta: np.ndarray
    v_b: np.ndarray
    omega_b: np.ndarray
    theta_dot: np.ndarray
    rotor_speeds: np.ndarray

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        return self.p_b.shape[:-1]

    @property
    def velocity(self) -> np.ndarray:
        """Generalized velocity (..., 8)."""
        return np.concatenate([self.v_b, self.omega_b, self.theta_dot], axis=-1)

    def with_velocity(self, v: np.ndarray) -> "SystemState":
        return self.replace(v_b=v[..., 0:3], omega_b=v[..., 3:6], theta_dot=v[..., 6:8])

    @classmethod
    def at_rest(cls, position, rotor_speed: float = 0.0, theta=None, batch_shape=()) -> "SystemState":
        batch_shape = tuple(batch_shape)
        p_b = np.broadcast_to(np.asarray(position, dtype=float), batch_shape + (3,)).copy()
        R_wb = np.broadcast_to(np.eye(3), batch_shape + (3, 3)).copy()
        if theta is None:
            theta = np.zeros(batch_shape + (2,))
        theta = np.broadcast_to(np.asarray(theta, dtype=float), batch_shape + (2,)).copy()
        return cls(
            p_b=p_b,
            R_wb=R_wb,
            theta=theta,
            v_b=np.zeros(batch_shape + (3,)),
            omega_b=np.zeros(batch_shape + (3,)),
            theta_dot=np.zeros(batch_shape + (2,)),
            rotor_speeds=np.full(batch_shape + (4,), float(rotor_speed)),
        )


@dataclass(frozen=True, eq=False)
class ControlInput(_ArrayRecord):
    """Rotor speed commands [rad/s] and joint torques [N·m] after the actuator model."""
    rotor_speed_cmd: np.ndarray
    joint_torque: np.ndarray


@dataclass(frozen=True, eq=False)
class ExternalWrench(_ArrayRecord):
    """Force [N] and torque [N·m] in world axes, applied at the gripper CoM."""
    force: np.ndarray
    torque: np.ndarray

    @classmethod
    def zeros(cls, batch_shape=()) -> "ExternalWrench":
        batch_shape = tuple(batch_shape)
        return cls(np.zeros(batch_shape + (3,)), np.zeros(batch_shape + (3,)))


@dataclass(frozen=True, eq=False)
class OuterCommand(_ArrayRecord):
    """Policy command in physical units, consumed by the inner loop at 300 Hz."""
    accel_des: np.ndarray
    bodyrate_ff: np.ndarray
    yaw_ref: np.ndarray
    joint_ref: np.ndarray

    @classmethod
    def zeros(cls, batch_shape=()) -> "OuterCommand":
        batch_shape = tuple(batch_shape)
        return cls(
            accel_des=np.zeros(batch_shape + (3,)),
            bodyrate_ff=np.zeros(batch_shape + (3,)),
            yaw_ref=np.zeros(batch_shape),
            joint_ref=np.zeros(batch_shape + (2,)),
        )

    def base_action(self) -> np.ndarray:
        """The 7-dim base block {accel, body rates, yaw}."""
        return np.concatenate([self.accel_des, self.bodyrate_ff, self.yaw_ref[..., None]], axis=-1)

    def joint_action(self) -> np.ndarray:
        return self.joint_ref
