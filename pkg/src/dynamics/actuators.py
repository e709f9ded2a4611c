"""
Rotor and joint actuator models.

Functions take the numeric DsamModel (duck-typed here to avoid an import cycle).
"""
from typing import Optional, Tuple

import numpy as np


def rotor_thrusts(rotor_speeds: np.ndarray, model) -> np.ndarray:
    """Per-rotor thrust f_i = kappa_f * omega_i^2 [N]."""
    speeds = np.asarray(rotor_speeds, dtype=float)
    return model.thrust_coeff * speeds ** 2


def thrusts_to_wrench(thrusts: np.ndarray, model) -> Tuple[np.ndarray, np.ndarray]:
    """Collective thrust and body torque produced by per-rotor thrusts."""
    positions = model.rotor_positions
    thrusts = np.asarray(thrusts, dtype=float)
    collective = np.sum(thrusts, axis=-1)
    torque = np.stack([
        thrusts @ positions[:, 1],
        -(thrusts @ positions[:, 0]),
        (model.drag_torque_coeff / model.thrust_coeff) * (thrusts @ model.rotor_yaw_signs),
    ], axis=-1)
    return collective, torque


def rotor_wrench(rotor_speeds: np.ndarray, model) -> Tuple[np.ndarray, np.ndarray]:
    """
    Base wrench from rotor speeds.

    Returns:
        (collective thrust along body z [N], body torque (..., 3) [N·m])
    """
    return thrusts_to_wrench(rotor_thrusts(rotor_speeds, model), model)


def rotor_lag(rotor_speeds: np.ndarray, rotor_speed_cmd: np.ndarray, dt: float, model) -> np.ndarray:
    """First-order rotor response, command and state clamped to the speed limits."""
    low, high = model.rotor_speed_min, model.rotor_speed_max
    cmd = np.clip(rotor_speed_cmd, low, high)
    speeds = rotor_speeds + (dt / model.rotor_time_constant) * (cmd - rotor_speeds)
    return np.clip(speeds, low, high)


def update_joint_integral(integral: np.ndarray, theta_ref: np.ndarray, theta: np.ndarray,
                          dt: float, model) -> np.ndarray:
    """
    Advance the servo's running integral of (theta_ref - theta) by one tick.

    Stays at zero while joint_integral_gain is 0. Otherwise it is clamped so
    the integral torque alone never exceeds the torque limit (anti-windup).
    """
    gain = model.joint_integral_gain
    if not gain:
        return np.zeros_like(np.asarray(integral, dtype=float))
    theta_ref = np.clip(theta_ref, -model.joint_limit, model.joint_limit)
    bound = model.joint_torque_limit / gain
    return np.clip(integral + (theta_ref - theta) * dt, -bound, bound)


def joint_actuator(theta_ref: np.ndarray, theta: np.ndarray, theta_dot: np.ndarray, model,
                   error_integral: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Position-servo torque with Coulomb and viscous joint friction.

    tau = k (theta_ref - theta) - d theta_dot - coulomb sign(theta_dot)
          - viscous theta_dot + k_i * error_integral, clamped to the torque limit.
    error_integral comes from update_joint_integral; None means no integral term.
    """
    theta_ref = np.clip(theta_ref, -model.joint_limit, model.joint_limit)
    stiffness = np.asarray(model.joint_stiffness)[..., None]
    damping = np.asarray(model.joint_damping)[..., None]
    coulomb = np.asarray(model.joint_coulomb_friction)[..., None]
    viscous = np.asarray(model.joint_viscous_friction)[..., None]
    torque = (
        stiffness * (theta_ref - theta)
        - damping * theta_dot
        - coulomb * np.sign(theta_dot)
        - viscous * theta_dot
    )
    if error_integral is not None and model.joint_integral_gain:
        torque = torque + model.joint_integral_gain * error_integral
    return np.clip(torque, -model.joint_torque_limit, model.joint_torque_limit)
