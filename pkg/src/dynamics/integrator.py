"""
Fixed-step integration of the DSAM dynamics.

Semi-implicit Euler (velocity first, then configuration with the updated
velocity) is the training integrator. RK4 in Munthe-Kaas form on SO(3) is
available for accuracy checks.
"""
import logging
from typing import Literal

import numpy as np

from src.errors import DivergenceError
from src.geometry.se3 import orthonormalize, so3_exp
from src.models.state import ControlInput, ExternalWrench, SystemState
from src.dynamics.actuators import rotor_lag
from src.dynamics.model import DsamModel, forward_dynamics

logger = logging.getLogger(__name__)

Integrator = Literal["semi_implicit", "rk4"]


def _apply_increment(state: SystemState, dp, dphi, dtheta, dv, h: float) -> SystemState:
    R = orthonormalize(state.R_wb @ so3_exp(h * dphi))
    return SystemState(
        p_b=state.p_b + h * dp,
        R_wb=R,
        theta=state.theta + h * dtheta,
        v_b=state.v_b + h * dv[..., 0:3],
        omega_b=state.omega_b + h * dv[..., 3:6],
        theta_dot=state.theta_dot + h * dv[..., 6:8],
        rotor_speeds=state.rotor_speeds,
    )


def _dexp_inv(phi: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Rate of the exponential coordinates phi given body rate omega (third-order series)."""
    return omega + 0.5 * np.cross(phi, omega) + np.cross(phi, np.cross(phi, omega)) / 12.0


def _rk4(state: SystemState, u: ControlInput, w: ExternalWrench, dt: float,
         model: DsamModel) -> SystemState:
    increments = []
    phi = np.zeros_like(state.omega_b)
    stage = state
    for h_next in (0.5 * dt, 0.5 * dt, dt, None):
        dv = forward_dynamics(stage, u, w, model)
        increment = (stage.v_b, _dexp_inv(phi, stage.omega_b), stage.theta_dot, dv)
        increments.append(increment)
        if h_next is not None:
            phi = h_next * increment[1]
            stage = _apply_increment(state, *increment, h_next)

    weights = (1.0, 2.0, 2.0, 1.0)
    combined = [
        sum(wk * inc[i] for wk, inc in zip(weights, increments)) / 6.0
        for i in range(4)
    ]
    return _apply_increment(state, *combined, dt)


def _semi_implicit(state: SystemState, u: ControlInput, w: ExternalWrench, dt: float,
                   model: DsamModel) -> SystemState:
    v = state.velocity + dt * forward_dynamics(state, u, w, model)
    return SystemState(
        p_b=state.p_b + dt * v[..., 0:3],
        R_wb=orthonormalize(state.R_wb @ so3_exp(dt * v[..., 3:6])),
        theta=state.theta + dt * v[..., 6:8],
        v_b=v[..., 0:3],
        omega_b=v[..., 3:6],
        theta_dot=v[..., 6:8],
        rotor_speeds=state.rotor_speeds,
    )


def step(state: SystemState, u: ControlInput, w: ExternalWrench, dt: float, model: DsamModel,
         method: Integrator = "semi_implicit", divergence_ceiling: float = 1.0e3) -> SystemState:
    """
    Advance the system by one physics step.

    Joint limits are enforced by clamping theta and zeroing theta_dot at the
    stop; rotor speeds follow their first-order lag toward u.rotor_speed_cmd.

    Raises:
        DivergenceError: if any state becomes non-finite or |v| exceeds the ceiling.
            The error carries the stepped state and the per-environment mask.
    """
    if method == "rk4":
        stepped = _rk4(state, u, w, dt, model)
    else:
        stepped = _semi_implicit(state, u, w, dt, model)

    limit = model.joint_limit
    at_stop = np.abs(stepped.theta) > limit
    stepped = stepped.replace(
        theta=np.clip(stepped.theta, -limit, limit),
        theta_dot=np.where(at_stop, 0.0, stepped.theta_dot),
        rotor_speeds=rotor_lag(state.rotor_speeds, u.rotor_speed_cmd, dt, model),
    )

    speed = np.linalg.norm(stepped.velocity, axis=-1)
    finite = np.all(np.isfinite(stepped.velocity), axis=-1) & np.all(np.isfinite(stepped.p_b), axis=-1)
    diverged = ~finite | (speed > divergence_ceiling)
    if np.any(diverged):
        logger.debug("divergence in %d of %d systems", int(np.sum(diverged)), diverged.size)
        raise DivergenceError(
            f"state diverged (|v| > {divergence_ceiling:g} or non-finite)",
            mask=diverged,
            state=stepped,
        )
    return stepped
