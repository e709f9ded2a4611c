"""
300 Hz inner loop: thrust-vector decomposition, tilt-prioritized attitude
control with body-rate feedforward, torque-space INDI and control allocation.

The controller uses its own nominal model (no payload, nominal joints); the
arm reaction torques and any model error reach it only through the filtered
gyro derivative, which is what INDI absorbs.
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.control.allocation import allocate
from src.control.filters import ButterworthFilter
from src.dynamics.actuators import joint_actuator, rotor_wrench, update_joint_integral
from src.dynamics.model import DsamModel
from src.geometry.se3 import quat_conjugate, quat_mul, rotmat_to_quat
from src.models.config import InnerLoopConfig, ModelParams
from src.models.state import ControlInput, OuterCommand, SystemState

logger = logging.getLogger(__name__)

_TILT_SINGULARITY = 1e-9
_HEADING_SINGULARITY = 1e-6


@dataclass(frozen=True, eq=False)
class InnerLoopController:
    """Constant part of the inner loop: nominal model, gains, filter design, tick period."""
    model: DsamModel
    config: InnerLoopConfig
    dt: float
    lowpass: ButterworthFilter

    @classmethod
    def build(cls, params: ModelParams, config: InnerLoopConfig, rate_hz: float) -> "InnerLoopController":
        nominal = params.model_copy(update={"payload_mass": 0.0})
        return cls(
            model=DsamModel.from_params(nominal),
            config=config,
            dt=1.0 / rate_hz,
            lowpass=ButterworthFilter.design(config.filter_cutoff_hz, rate_hz),
        )

    @property
    def mass(self) -> float:
        return float(self.model.total_mass)


@dataclass(frozen=True, eq=False)
class InnerLoopState:
    """INDI measurement memory and the joint servo integrator; one row per environment."""
    omega_filtered: np.ndarray
    alpha_filtered: np.ndarray
    torque_filtered: np.ndarray
    gyro_filter: np.ndarray
    torque_filter: np.ndarray
    rotor_cmd_prev: np.ndarray
    R_des_prev: np.ndarray
    joint_error_integral: np.ndarray
    warm: np.ndarray

    @classmethod
    def initial(cls, batch_shape=(), rotor_speed: float = 0.0) -> "InnerLoopState":
        batch_shape = tuple(batch_shape)
        return cls(
            omega_filtered=np.zeros(batch_shape + (3,)),
            alpha_filtered=np.zeros(batch_shape + (3,)),
            torque_filtered=np.zeros(batch_shape + (3,)),
            gyro_filter=np.zeros(batch_shape + (3, 2)),
            torque_filter=np.zeros(batch_shape + (3, 2)),
            rotor_cmd_prev=np.full(batch_shape + (4,), float(rotor_speed)),
            R_des_prev=np.broadcast_to(np.eye(3), batch_shape + (3, 3)).copy(),
            joint_error_integral=np.zeros(batch_shape + (2,)),
            warm=np.zeros(batch_shape, dtype=bool),
        )

    def reset(self, mask: np.ndarray, rotor_speed: float = 0.0) -> "InnerLoopState":
        """Return a copy where rows selected by mask are cold again."""
        fresh = InnerLoopState.initial(self.warm.shape, rotor_speed)
        changes = {}
        for field in dataclasses.fields(self):
            old, new = getattr(self, field.name), getattr(fresh, field.name)
            m = np.asarray(mask, dtype=bool).reshape(mask.shape + (1,) * (old.ndim - np.ndim(mask)))
            changes[field.name] = np.where(m, new, old)
        return InnerLoopState(**changes)


def update_measurements(inner_state: InnerLoopState, gyro: np.ndarray, applied_torque: np.ndarray,
                        controller: InnerLoopController) -> InnerLoopState:
    """
    Push one gyro sample and one applied-torque sample through the low-pass filters.

    Cold rows initialize their filters to the current sample, so the first
    filtered angular acceleration is exactly zero.
    """
    lowpass = controller.lowpass
    cold = ~inner_state.warm[..., None, None]
    gyro_z = np.where(cold, lowpass.initial_state(gyro), inner_state.gyro_filter)
    torque_z = np.where(cold, lowpass.initial_state(applied_torque), inner_state.torque_filter)
    previous = np.where(cold[..., 0], gyro, inner_state.omega_filtered)

    omega_filtered, gyro_z = lowpass.step(gyro, gyro_z)
    torque_filtered, torque_z = lowpass.step(applied_torque, torque_z)
    alpha_filtered = (omega_filtered - previous) / controller.dt

    return dataclasses.replace(
        inner_state,
        omega_filtered=omega_filtered,
        alpha_filtered=alpha_filtered,
        torque_filtered=torque_filtered,
        gyro_filter=gyro_z,
        torque_filter=torque_z,
        warm=np.ones_like(inner_state.warm),
    )


def thrust_attitude_decomposition(accel_des: np.ndarray, yaw_ref: np.ndarray,
                                  controller: InnerLoopController,
                                  previous_attitude: Optional[np.ndarray] = None
                                  ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map a world acceleration and heading to a desired attitude and collective thrust.

    Near free-fall commands (|a + g z| below the configured threshold) keep the
    previous desired attitude and command the minimum thrust.

    Returns:
        (R_des (..., 3, 3), collective thrust (...,) [N])
    """
    accel_des = np.asarray(accel_des, dtype=float)
    yaw_ref = np.asarray(yaw_ref, dtype=float)
    thrust_vector = accel_des + np.array([0.0, 0.0, controller.model.gravity])
    norm = np.linalg.norm(thrust_vector, axis=-1)
    degenerate = norm < controller.config.degenerate_accel
    if np.any(degenerate):
        logger.debug("degenerate thrust command in %d systems", int(np.sum(degenerate)))

    z_axis = thrust_vector / np.where(degenerate, 1.0, norm)[..., None]
    zero = np.zeros_like(yaw_ref)
    heading = np.stack([np.cos(yaw_ref), np.sin(yaw_ref), zero], axis=-1)
    side = np.stack([-np.sin(yaw_ref), np.cos(yaw_ref), zero], axis=-1)

    y_axis = np.cross(z_axis, heading)
    y_norm = np.linalg.norm(y_axis, axis=-1, keepdims=True)
    along_heading = y_norm < _HEADING_SINGULARITY
    # Body z aligned with the heading: take x from the lateral axis instead
    x_fallback = np.cross(side, z_axis)
    x_fallback = x_fallback / np.maximum(np.linalg.norm(x_fallback, axis=-1, keepdims=True), 1e-12)
    y_axis = np.where(along_heading, np.cross(z_axis, x_fallback), y_axis / np.maximum(y_norm, 1e-12))
    x_axis = np.cross(y_axis, z_axis)
    R_des = np.stack([x_axis, y_axis, z_axis], axis=-1)

    thrust = controller.mass * norm
    if previous_attitude is None:
        previous_attitude = np.broadcast_to(np.eye(3), R_des.shape)
    R_des = np.where(degenerate[..., None, None], previous_attitude, R_des)
    thrust = np.where(degenerate, controller.config.min_thrust, thrust)
    return R_des, thrust


def attitude_error_split(R: np.ndarray, R_des: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split q_e = q⁻¹ ⊗ q_des into reduced (tilt) and yaw parts, q_e = q_red ⊗ q_yaw.

    Returns:
        (q_red (..., 4), q_yaw (..., 4))
    """
    q = rotmat_to_quat(R, check=False)
    q_des = rotmat_to_quat(R_des, check=False)
    q_e = quat_mul(quat_conjugate(q), q_des)
    w, x, y, z = q_e[..., 0], q_e[..., 1], q_e[..., 2], q_e[..., 3]
    n = np.sqrt(w * w + z * z)
    flipped = n < _TILT_SINGULARITY
    safe = np.where(flipped, 1.0, n)

    q_red = np.stack([n, (w * x - y * z) / safe, (w * y + x * z) / safe, np.zeros_like(n)], axis=-1)
    q_yaw = np.stack([w / safe, np.zeros_like(n), np.zeros_like(n), z / safe], axis=-1)
    identity = np.array([1.0, 0.0, 0.0, 0.0])
    q_red = np.where(flipped[..., None], q_e, q_red)
    q_yaw = np.where(flipped[..., None], identity, q_yaw)
    return q_red, q_yaw


def tilt_prioritized_attitude(R: np.ndarray, R_des: np.ndarray, bodyrate_ff: np.ndarray,
                              omega_meas: np.ndarray, gains: InnerLoopConfig) -> np.ndarray:
    """Desired body angular acceleration [rad/s²] from the split attitude error."""
    q_red, q_yaw = attitude_error_split(R, R_des)
    e_tilt = 2.0 * np.stack([q_red[..., 1], q_red[..., 2], np.zeros_like(q_red[..., 0])], axis=-1)
    yaw_sign = np.where(q_yaw[..., 0] < 0.0, -1.0, 1.0)
    e_yaw = np.zeros_like(e_tilt)
    e_yaw[..., 2] = 2.0 * yaw_sign * q_yaw[..., 3]

    omega_des = gains.k_tilt * e_tilt + gains.k_yaw * e_yaw + bodyrate_ff
    return gains.k_rate * (omega_des - omega_meas)


def indi_torque(alpha_cmd: np.ndarray, inner_state: InnerLoopState,
                controller: InnerLoopController) -> np.ndarray:
    """tau_cmd = tau_filtered + I_base (alpha_cmd - alpha_filtered)."""
    increment = np.einsum("...ij,...j->...i", controller.model.base_inertia,
                          alpha_cmd - inner_state.alpha_filtered)
    return inner_state.torque_filtered + increment


def inner_loop_tick(cmd: OuterCommand, state: SystemState, inner_state: InnerLoopState,
                    controller: InnerLoopController, joint_model: Optional[DsamModel] = None,
                    gyro_noise: Optional[np.ndarray] = None) -> Tuple[ControlInput, InnerLoopState]:
    """
    One inner-loop update.

    Args:
        cmd: policy command in physical units
        state: measured system state
        inner_state: filter memory from the previous tick
        controller: nominal model, gains and filter design
        joint_model: model whose joint servo produces the returned joint torque
            (the plant, which may be randomized); defaults to the nominal model
        gyro_noise: additive gyro noise sample, same shape as omega_b

    Returns:
        (ControlInput, InnerLoopState). The joint torque is the servo output at
        this instant; simulators refresh it every physics step.
    """
    config = controller.config
    gyro = state.omega_b if gyro_noise is None else state.omega_b + gyro_noise
    rotor_source = state.rotor_speeds if config.rotor_speed_feedback else inner_state.rotor_cmd_prev
    _, applied_torque = rotor_wrench(rotor_source, controller.model)
    inner_state = update_measurements(inner_state, gyro, applied_torque, controller)

    if config.mode == "ctbr":
        collective = controller.mass * (cmd.accel_des[..., 2] + controller.model.gravity)
        collective = np.maximum(collective, config.min_thrust)
        R_des = inner_state.R_des_prev
        alpha_cmd = config.k_rate * (cmd.bodyrate_ff - gyro)
    else:
        R_des, collective = thrust_attitude_decomposition(
            cmd.accel_des, cmd.yaw_ref, controller, inner_state.R_des_prev
        )
        alpha_cmd = tilt_prioritized_attitude(state.R_wb, R_des, cmd.bodyrate_ff, gyro, config)

    torque_cmd = indi_torque(alpha_cmd, inner_state, controller)
    rotor_speed_cmd = allocate(collective, torque_cmd, controller.model)

    servo_model = joint_model if joint_model is not None else controller.model
    integral = update_joint_integral(inner_state.joint_error_integral, cmd.joint_ref, state.theta,
                                     controller.dt, servo_model)
    joint_torque = joint_actuator(cmd.joint_ref, state.theta, state.theta_dot, servo_model, integral)
    inner_state = dataclasses.replace(inner_state, rotor_cmd_prev=rotor_speed_cmd, R_des_prev=R_des,
                                      joint_error_integral=integral)
    return ControlInput(rotor_speed_cmd=rotor_speed_cmd, joint_torque=joint_torque), inner_state
