"""
Control allocation: collective thrust + body torque -> rotor speed commands.

Saturation priority is thrust > roll/pitch torque > yaw torque. The tilt
torque and then the yaw torque are scaled down by the largest factor in [0, 1]
that keeps every rotor thrust inside its limits.
"""
import numpy as np

from src.dynamics.actuators import thrusts_to_wrench


def allocation_matrix(model) -> np.ndarray:
    """4x4 map from per-rotor thrusts to (thrust, tau_x, tau_y, tau_z)."""
    positions = model.rotor_positions
    return np.stack([
        np.ones(4),
        positions[:, 1],
        -positions[:, 0],
        (model.drag_torque_coeff / model.thrust_coeff) * model.rotor_yaw_signs,
    ])


def _feasible_scale(base: np.ndarray, direction: np.ndarray, low: float, high: float) -> np.ndarray:
    """Largest k in [0, 1] with low <= base + k * direction <= high on every rotor."""
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(direction > 0, (high - base) / direction, np.inf)
        down = np.where(direction < 0, (low - base) / direction, np.inf)
    return np.clip(np.min(np.minimum(up, down), axis=-1), 0.0, 1.0)


def allocate(collective_thrust: np.ndarray, torque_cmd: np.ndarray, model) -> np.ndarray:
    """
    Invert the allocation map and convert per-rotor thrust to speed.

    Args:
        collective_thrust: (...,) [N], >= 0
        torque_cmd: (..., 3) body torque [N·m]
        model: DsamModel (rotor geometry, coefficients, speed limits)

    Returns:
        (..., 4) rotor speed commands [rad/s]
    """
    kappa = model.thrust_coeff
    low = kappa * model.rotor_speed_min ** 2
    high = kappa * model.rotor_speed_max ** 2
    A_inv = np.linalg.inv(allocation_matrix(model))

    thrust = np.clip(np.asarray(collective_thrust, dtype=float), 4.0 * low, 4.0 * high)
    torque_cmd = np.asarray(torque_cmd, dtype=float)
    from_thrust = thrust[..., None] * A_inv[:, 0]
    from_tilt = torque_cmd[..., 0:2] @ A_inv[:, 1:3].T
    from_yaw = torque_cmd[..., 2:3] * A_inv[:, 3]

    tilt_scale = _feasible_scale(from_thrust, from_tilt, low, high)
    thrusts = from_thrust + tilt_scale[..., None] * from_tilt
    yaw_scale = _feasible_scale(thrusts, from_yaw, low, high)
    thrusts = np.clip(thrusts + yaw_scale[..., None] * from_yaw, low, high)
    return np.sqrt(thrusts / kappa)


def allocated_wrench(rotor_speed_cmd: np.ndarray, model):
    """Forward map used to check what an allocation actually delivers."""
    return thrusts_to_wrench(model.thrust_coeff * np.asarray(rotor_speed_cmd) ** 2, model)
