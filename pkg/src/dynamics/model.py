"""
Floating-base dynamics of the quadrotor with a 2-DoF shoulder arm.

Generalized velocity v = (v_b world [3], omega_b body [3], theta_dot [2]) and
M(q) v_dot + C(q, v) v + G(q) = tau(q, u). Three rigid bodies: base, arm link,
gripper (+ payload). The arm hangs from mount_offset through a pitch joint about
body-y followed by a roll joint about the pitched x-axis; with theta = 0 the
link points along -z_body.

Mass matrix and bias forces are assembled per body from point Jacobians
expressed in base-frame axes (Kane's form), which keeps the body angular
velocity as a quasi-velocity without any Euler-angle coordinates.
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.errors import NonPhysicalModelError, SingularMassMatrixError
from src.geometry.se3 import Pose, skew
from src.models.config import ModelParams
from src.models.state import ControlInput, ExternalWrench, SystemState
from src.dynamics.actuators import rotor_wrench

logger = logging.getLogger(__name__)

NUM_DOF = 8


@dataclass(frozen=True, eq=False)
class DsamModel:
    """
    Numeric view of ModelParams used by the vectorized dynamics.

    Fields that domain randomization touches carry the environment batch
    shape; shared geometry and actuator constants are plain arrays that
    broadcast against it. The gripper mass and inertia already include the
    payload (inertia scaled with the mass ratio).
    """
    base_mass: np.ndarray
    arm_mass: np.ndarray
    ee_mass: np.ndarray
    base_inertia: np.ndarray
    arm_inertia: np.ndarray
    ee_inertia: np.ndarray
    mount_offset: np.ndarray
    arm_com_distance: float
    ee_com_distance: float
    rotor_positions: np.ndarray
    rotor_yaw_signs: np.ndarray
    thrust_coeff: float
    drag_torque_coeff: float
    rotor_time_constant: float
    rotor_speed_min: float
    rotor_speed_max: float
    joint_limit: float
    joint_stiffness: np.ndarray
    joint_damping: np.ndarray
    joint_coulomb_friction: np.ndarray
    joint_viscous_friction: np.ndarray
    joint_integral_gain: float
    joint_torque_limit: float
    gravity: float

    @classmethod
    def from_params(cls, params: ModelParams, payload_mass=0.0, stiffness_scale=1.0,
                    friction_scale=1.0) -> "DsamModel":
        """
        Build the numeric model, optionally with per-environment randomization.

        Args:
            params: nominal parameters
            payload_mass: extra gripper mass [kg], scalar or (N,) array
            stiffness_scale: joint stiffness multiplier, scalar or (N,)
            friction_scale: joint Coulomb/viscous friction multiplier, scalar or (N,)

        Raises:
            NonPhysicalModelError: if a mass is non-positive or an inertia is not SPD
        """
        payload = params.payload_mass + np.asarray(payload_mass, dtype=float)
        stiffness_scale = np.asarray(stiffness_scale, dtype=float)
        friction_scale = np.asarray(friction_scale, dtype=float)

        ee_mass = params.ee_mass + payload
        ratio = ee_mass / params.ee_mass
        ee_inertia = np.asarray(params.ee_inertia, dtype=float) * ratio[..., None, None]
        base_inertia = np.asarray(params.base_inertia, dtype=float)
        arm_inertia = np.asarray(params.arm_inertia, dtype=float)

        if np.any(ee_mass <= 0) or params.base_mass <= 0 or params.arm_mass <= 0:
            raise NonPhysicalModelError("all body masses must be > 0")
        for name, inertia in (("base", base_inertia), ("arm", arm_inertia), ("gripper", ee_inertia)):
            if np.any(np.abs(inertia - np.swapaxes(inertia, -1, -2)) > 1e-12):
                raise NonPhysicalModelError(f"{name} inertia is not symmetric")
            if np.any(np.linalg.eigvalsh(inertia) <= 0):
                raise NonPhysicalModelError(f"{name} inertia is not positive definite")

        link, tip = params.link_lengths
        return cls(
            base_mass=np.asarray(params.base_mass, dtype=float),
            arm_mass=np.asarray(params.arm_mass, dtype=float),
            ee_mass=ee_mass,
            base_inertia=base_inertia,
            arm_inertia=arm_inertia,
            ee_inertia=ee_inertia,
            mount_offset=np.asarray(params.mount_offset, dtype=float),
            arm_com_distance=0.5 * link,
            ee_com_distance=link + tip,
            rotor_positions=np.asarray(params.rotor_positions, dtype=float),
            rotor_yaw_signs=np.asarray(params.rotor_yaw_signs, dtype=float),
            thrust_coeff=params.thrust_coeff,
            drag_torque_coeff=params.drag_torque_coeff,
            rotor_time_constant=params.rotor_time_constant,
            rotor_speed_min=params.rotor_speed_limits[0],
            rotor_speed_max=params.rotor_speed_limits[1],
            joint_limit=params.joint_limit,
            joint_stiffness=params.joint_stiffness * stiffness_scale,
            joint_damping=np.asarray(params.joint_damping, dtype=float),
            joint_coulomb_friction=params.joint_coulomb_friction * friction_scale,
            joint_viscous_friction=params.joint_viscous_friction * friction_scale,
            joint_integral_gain=params.joint_integral_gain,
            joint_torque_limit=params.joint_torque_limit,
            gravity=params.gravity,
        )

    @property
    def total_mass(self) -> np.ndarray:
        return self.base_mass + self.arm_mass + self.ee_mass


# =============================================================================
# Arm kinematics
# =============================================================================

@dataclass(frozen=True, eq=False)
class ArmKinematics:
    """Link orientation and unit direction with their joint derivatives (base-frame axes)."""
    R_bl: np.ndarray        # (..., 3, 3) link frame in base axes
    direction: np.ndarray   # (..., 3) unit vector from joint to link tip
    d_jacobian: np.ndarray  # (..., 3, 2) d(direction)/d(theta)
    d_hessian: np.ndarray   # (..., 3, 2, 2)
    joint_axes: np.ndarray  # (..., 3, 2) angular velocity per unit joint rate
    joint_axes_rate: np.ndarray  # (..., 3) d(roll axis)/d(theta_pitch)


def arm_kinematics(theta: np.ndarray) -> ArmKinematics:
    theta = np.asarray(theta, dtype=float)
    c1, s1 = np.cos(theta[..., 0]), np.sin(theta[..., 0])
    c2, s2 = np.cos(theta[..., 1]), np.sin(theta[..., 1])
    zero, one = np.zeros_like(c1), np.ones_like(c1)

    # R_bl = R_y(theta_1) @ R_x(theta_2)
    R_bl = np.stack([
        np.stack([c1, s1 * s2, s1 * c2], axis=-1),
        np.stack([zero, c2, -s2], axis=-1),
        np.stack([-s1, c1 * s2, c1 * c2], axis=-1),
    ], axis=-2)
    direction = np.stack([-s1 * c2, s2, -c1 * c2], axis=-1)

    d_theta1 = np.stack([-c1 * c2, zero, s1 * c2], axis=-1)
    d_theta2 = np.stack([s1 * s2, c2, c1 * s2], axis=-1)
    d_jacobian = np.stack([d_theta1, d_theta2], axis=-1)

    d_11 = np.stack([s1 * c2, zero, c1 * c2], axis=-1)
    d_12 = np.stack([c1 * s2, zero, -s1 * s2], axis=-1)
    d_22 = np.stack([s1 * c2, -s2, c1 * c2], axis=-1)
    d_hessian = np.stack([np.stack([d_11, d_12], axis=-1), np.stack([d_12, d_22], axis=-1)], axis=-1)

    pitch_axis = np.stack([zero, one, zero], axis=-1)
    roll_axis = np.stack([c1, zero, -s1], axis=-1)
    joint_axes = np.stack([pitch_axis, roll_axis], axis=-1)
    joint_axes_rate = np.stack([-s1, zero, -c1], axis=-1)

    return ArmKinematics(R_bl, direction, d_jacobian, d_hessian, joint_axes, joint_axes_rate)


@dataclass(frozen=True, eq=False)
class _Body:
    mass: np.ndarray
    inertia: np.ndarray       # base-frame axes, about the body CoM
    com: np.ndarray           # CoM in base frame relative to base CoM
    com_jacobian: np.ndarray  # (..., 3, 2)
    com_accel0: np.ndarray    # second-order joint term of the CoM acceleration
    is_arm: bool
    linear: np.ndarray        # (..., 3, 8) body-frame point Jacobian
    angular: np.ndarray       # (..., 3, 8) base-frame angular Jacobian


def _rotate_inertia(R_bl: np.ndarray, inertia: np.ndarray) -> np.ndarray:
    return R_bl @ inertia @ np.swapaxes(R_bl, -1, -2)


def _bodies(state: SystemState, model: DsamModel, kin: ArmKinematics) -> List[_Body]:
    R = np.asarray(state.R_wb, dtype=float)
    theta_dot = np.asarray(state.theta_dot, dtype=float)
    batch = np.broadcast_shapes(R.shape[:-2], np.shape(model.ee_mass), kin.direction.shape[:-1])
    R_t = np.broadcast_to(np.swapaxes(R, -1, -2), batch + (3, 3))

    d_ddot0 = np.einsum("...ijk,...j,...k->...i", kin.d_hessian, theta_dot, theta_dot)

    bodies = []
    base_linear = np.zeros(batch + (3, NUM_DOF))
    base_linear[..., :, 0:3] = R_t
    base_angular = np.zeros(batch + (3, NUM_DOF))
    base_angular[..., :, 3:6] = np.eye(3)
    bodies.append(_Body(
        mass=np.broadcast_to(model.base_mass, batch),
        inertia=np.broadcast_to(model.base_inertia, batch + (3, 3)),
        com=np.zeros(batch + (3,)),
        com_jacobian=np.zeros(batch + (3, 2)),
        com_accel0=np.zeros(batch + (3,)),
        is_arm=False,
        linear=base_linear,
        angular=base_angular,
    ))

    angular = np.zeros(batch + (3, NUM_DOF))
    angular[..., :, 3:6] = np.eye(3)
    angular[..., :, 6:8] = kin.joint_axes
    for mass, inertia, distance in (
        (model.arm_mass, model.arm_inertia, model.arm_com_distance),
        (model.ee_mass, model.ee_inertia, model.ee_com_distance),
    ):
        com = np.broadcast_to(model.mount_offset + distance * kin.direction, batch + (3,))
        com_jacobian = np.broadcast_to(distance * kin.d_jacobian, batch + (3, 2))
        linear = np.zeros(batch + (3, NUM_DOF))
        linear[..., :, 0:3] = R_t
        linear[..., :, 3:6] = -skew(com)
        linear[..., :, 6:8] = com_jacobian
        bodies.append(_Body(
            mass=np.broadcast_to(mass, batch),
            inertia=np.broadcast_to(_rotate_inertia(kin.R_bl, inertia), batch + (3, 3)),
            com=com,
            com_jacobian=com_jacobian,
            com_accel0=np.broadcast_to(distance * d_ddot0, batch + (3,)),
            is_arm=True,
            linear=linear,
            angular=angular,
        ))
    return bodies


# =============================================================================
# Equations of motion
# =============================================================================

def mass_matrix(state: SystemState, model: DsamModel) -> np.ndarray:
    """Generalized mass matrix M(q), (..., 8, 8). Only the configuration of state is read."""
    kin = arm_kinematics(state.theta)
    M = 0.0
    for body in _bodies(state, model, kin):
        M = M + body.mass[..., None, None] * np.einsum("...ki,...kj->...ij", body.linear, body.linear)
        M = M + np.einsum("...ki,...kl,...lj->...ij", body.angular, body.inertia, body.angular)
    return M


def _bias(state: SystemState, model: DsamModel, include_gravity: bool = True) -> np.ndarray:
    kin = arm_kinematics(state.theta)
    omega = np.asarray(state.omega_b, dtype=float)
    theta_dot = np.asarray(state.theta_dot, dtype=float)
    up_in_body = np.asarray(state.R_wb, dtype=float)[..., 2, :]

    h = 0.0
    for body in _bodies(state, model, kin):
        com_rate = np.einsum("...ij,...j->...i", body.com_jacobian, theta_dot)
        accel0 = (
            np.cross(omega, np.cross(omega, body.com))
            + 2.0 * np.cross(omega, com_rate)
            + body.com_accel0
        )
        if include_gravity:
            accel0 = accel0 + model.gravity * up_in_body
        h = h + np.einsum("...ki,...k->...i", body.linear, body.mass[..., None] * accel0)

        if body.is_arm:
            relative_rate = np.einsum("...ij,...j->...i", kin.joint_axes, theta_dot)
            spin = omega + relative_rate
            alpha0 = (
                np.cross(omega, relative_rate)
                + (theta_dot[..., 0] * theta_dot[..., 1])[..., None] * kin.joint_axes_rate
            )
        else:
            spin = np.broadcast_to(omega, body.com.shape)
            alpha0 = np.zeros_like(body.com)
        moment = (
            np.einsum("...ij,...j->...i", body.inertia, alpha0)
            + np.cross(spin, np.einsum("...ij,...j->...i", body.inertia, spin))
        )
        h = h + np.einsum("...ki,...k->...i", body.angular, moment)
    return h


def bias_forces(state: SystemState, model: DsamModel) -> np.ndarray:
    """C(q, v) v + G(q), (..., 8), with gravity moved to the left-hand side."""
    return _bias(state, model, include_gravity=True)


def coriolis_forces(state: SystemState, model: DsamModel) -> np.ndarray:
    """Velocity-product part C(q, v) v only."""
    return _bias(state, model, include_gravity=False)


def end_effector_jacobian(state: SystemState, model: DsamModel) -> Tuple[np.ndarray, np.ndarray]:
    """
    World-frame Jacobians of the gripper CoM.

    Returns:
        (linear, angular), each (..., 3, 8): v_ee = linear @ v, w_ee = angular @ v
    """
    kin = arm_kinematics(state.theta)
    gripper = _bodies(state, model, kin)[2]
    R = np.asarray(state.R_wb, dtype=float)
    return R @ gripper.linear, R @ gripper.angular


def generalized_forces(state: SystemState, u: ControlInput, w: ExternalWrench,
                       model: DsamModel) -> np.ndarray:
    """
    tau(q, u) from the current rotor speeds, joint torques and the gripper wrench.

    Rotor thrust and drag act on the base from state.rotor_speeds (the lagged
    rotor state); u.rotor_speed_cmd only drives the rotor lag in `step`.
    """
    R = np.asarray(state.R_wb, dtype=float)
    thrust, body_torque = rotor_wrench(state.rotor_speeds, model)
    kin = arm_kinematics(state.theta)
    gripper = _bodies(state, model, kin)[2]
    batch = gripper.com.shape[:-1]

    tau = np.zeros(batch + (NUM_DOF,))
    tau[..., 0:3] = R[..., :, 2] * thrust[..., None]
    tau[..., 3:6] = body_torque
    tau[..., 6:8] = u.joint_torque

    force_body = np.einsum("...ji,...j->...i", R, w.force)
    torque_body = np.einsum("...ji,...j->...i", R, w.torque)
    tau = tau + np.einsum("...ki,...k->...i", gripper.linear, force_body)
    tau = tau + np.einsum("...ki,...k->...i", gripper.angular, torque_body)
    return tau


def forward_dynamics(state: SystemState, u: ControlInput, w: ExternalWrench,
                     model: DsamModel) -> np.ndarray:
    """
    Solve M v_dot = tau - C v - G.

    Raises:
        SingularMassMatrixError: if the Cholesky factorization of M fails
    """
    M = mass_matrix(state, model)
    rhs = generalized_forces(state, u, w, model) - bias_forces(state, model)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise SingularMassMatrixError(f"mass matrix is not positive definite: {exc}") from exc
    return np.linalg.solve(M, rhs[..., None])[..., 0]


# =============================================================================
# Kinematics and energy
# =============================================================================

def body_com_positions(state: SystemState, model: DsamModel) -> np.ndarray:
    """World positions of base, arm and gripper CoMs, (..., 3, 3) stacked on axis -2."""
    kin = arm_kinematics(state.theta)
    R = np.asarray(state.R_wb, dtype=float)
    coms = [body.com for body in _bodies(state, model, kin)]
    return np.stack([state.p_b + np.einsum("...ij,...j->...i", R, c) for c in coms], axis=-2)


def forward_kinematics(state: SystemState, model: DsamModel) -> Pose:
    """Gripper-CoM pose in the world frame."""
    kin = arm_kinematics(state.theta)
    R = np.asarray(state.R_wb, dtype=float)
    offset = model.mount_offset + model.ee_com_distance * kin.direction
    position = state.p_b + np.einsum("...ij,...j->...i", R, offset)
    return Pose.from_rotmat(position, R @ kin.R_bl, check=False)


def kinetic_energy(state: SystemState, model: DsamModel) -> np.ndarray:
    v = state.velocity
    return 0.5 * np.einsum("...i,...ij,...j->...", v, mass_matrix(state, model), v)


def potential_energy(state: SystemState, model: DsamModel) -> np.ndarray:
    heights = body_com_positions(state, model)[..., 2]
    masses = np.stack(np.broadcast_arrays(model.base_mass, model.arm_mass, model.ee_mass), axis=-1)
    return model.gravity * np.sum(masses * heights, axis=-1)


def total_energy(state: SystemState, model: DsamModel) -> np.ndarray:
    return kinetic_energy(state, model) + potential_energy(state, model)
