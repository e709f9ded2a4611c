"""
Equations of motion against an independent Euler-Lagrange derivation
"""
import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.dynamics import integrator
from src.dynamics.model import (
    DsamModel,
    bias_forces,
    coriolis_forces,
    end_effector_jacobian,
    forward_dynamics,
    forward_kinematics,
    mass_matrix,
    potential_energy,
    total_energy,
)
from src.errors import NonPhysicalModelError
from src.geometry.se3 import so3_exp, yaw_rotmat
from src.models.state import ControlInput, ExternalWrench, SystemState
from tests import oracles


def _random_state(rng, index: int) -> SystemState:
    return SystemState(
        p_b=rng.normal(size=3) + np.array([0.0, 0.0, 3.0]),
        R_wb=Rotation.random(random_state=index).as_matrix(),
        theta=rng.uniform(-1.2, 1.2, 2),
        v_b=rng.normal(size=3),
        omega_b=rng.normal(size=3),
        theta_dot=rng.normal(size=2) * 2.0,
        rotor_speeds=rng.uniform(800.0, 2500.0, 4),
    )


def _random_inputs(rng):
    u = ControlInput(rotor_speed_cmd=np.zeros(4), joint_torque=rng.uniform(-0.1, 0.1, 2))
    w = ExternalWrench(force=rng.normal(size=3), torque=rng.normal(size=3) * 0.05)
    return u, w


@pytest.mark.parametrize("index", range(5))
def test_forward_dynamics_matches_lagrange_oracle(model, index):
    """Kane-form accelerations equal the complex-step Euler-Lagrange ones"""
    rng = np.random.default_rng(100 + index)
    state = _random_state(rng, index)
    u, w = _random_inputs(rng)

    v_dot = forward_dynamics(state, u, w, model)
    reference = oracles.lagrange_acceleration(state, u, w, model)
    scale = max(1.0, float(np.max(np.abs(reference))))
    np.testing.assert_allclose(v_dot, reference, rtol=1e-5, atol=1e-5 * scale)


def test_mass_matrix_matches_oracle(rng, model):
    state = _random_state(rng, 11)
    q = np.concatenate([state.p_b, np.zeros(3), state.theta])
    np.testing.assert_allclose(mass_matrix(state, model), oracles.mass_matrix(q, state.R_wb, model),
                               rtol=1e-9, atol=1e-12)


def test_mass_matrix_symmetric_positive_definite(rng, model):
    state = SystemState.stack([_random_state(rng, i) for i in range(8)])
    M = mass_matrix(state, model)
    np.testing.assert_allclose(M, np.swapaxes(M, -1, -2), atol=1e-12)
    assert np.all(np.linalg.eigvalsh(M) > 0)


def test_end_effector_jacobian_matches_oracle(rng, model):
    state = _random_state(rng, 3)
    q = np.concatenate([state.p_b, np.zeros(3), state.theta])
    Jx, Jw, _, _ = oracles.jacobians(q, state.R_wb, model)
    linear, angular = end_effector_jacobian(state, model)
    np.testing.assert_allclose(linear, Jx[2], atol=1e-10)
    np.testing.assert_allclose(angular, Jw[2], atol=1e-10)


def test_batched_dynamics_match_single_rows(rng, model):
    states = [_random_state(rng, i) for i in range(4)]
    inputs = [_random_inputs(rng) for _ in range(4)]
    batched = forward_dynamics(
        SystemState.stack(states),
        ControlInput.stack([u for u, _ in inputs]),
        ExternalWrench.stack([w for _, w in inputs]),
        model,
    )
    for i, (state, (u, w)) in enumerate(zip(states, inputs)):
        np.testing.assert_allclose(batched[i], forward_dynamics(state, u, w, model), atol=1e-10)


def test_bias_at_rest_is_the_gravity_force(rng, model):
    """v = 0: the bias is G(q), total weight on the translation rows and dV/dtheta on the joint rows"""
    state = _random_state(rng, 7).with_velocity(np.zeros(8))
    G = bias_forces(state, model)
    np.testing.assert_allclose(G[0:3], [0.0, 0.0, float(model.total_mass) * model.gravity], atol=1e-10)
    eps = 1e-6
    for j in range(2):
        step = np.zeros(2)
        step[j] = eps
        up = potential_energy(state.replace(theta=state.theta + step), model)
        down = potential_energy(state.replace(theta=state.theta - step), model)
        assert G[6 + j] == pytest.approx((up - down) / (2.0 * eps), abs=1e-6)


def test_hover_is_an_equilibrium(params, model):
    """Arm hanging straight down, rotors at hover speed: nothing accelerates"""
    state = SystemState.at_rest([0.0, 0.0, 3.0], params.hover_rotor_speed)
    v_dot = forward_dynamics(state, ControlInput(np.zeros(4), np.zeros(2)), ExternalWrench.zeros(), model)
    np.testing.assert_allclose(v_dot, np.zeros(8), atol=1e-9)


def test_free_fall_distance(model):
    """Rotors off, joints free: 0.1 s of free fall drops 0.04905 m and the arm stays put"""
    state = SystemState.at_rest([0.0, 0.0, 3.0], 0.0)
    u = ControlInput(np.zeros(4), np.zeros(2))
    dt = 1.0 / 900.0
    for _ in range(90):
        state = integrator.step(state, u, ExternalWrench.zeros(), dt, model, method="rk4")
    assert 3.0 - state.p_b[2] == pytest.approx(0.5 * 9.81 * 0.1 ** 2, rel=1e-6)
    np.testing.assert_allclose(state.theta, 0.0, atol=1e-12)
    np.testing.assert_allclose(state.omega_b, 0.0, atol=1e-12)


def test_energy_conserved_without_inputs(model):
    """No rotors, no joint torque: kinetic + potential energy is constant under RK4"""
    state = SystemState(
        p_b=np.array([0.0, 0.0, 3.0]),
        R_wb=np.eye(3),
        theta=np.array([0.2, -0.1]),
        v_b=np.array([0.3, -0.2, 0.5]),
        omega_b=np.array([0.8, -0.5, 1.2]),
        theta_dot=np.array([0.6, -0.4]),
        rotor_speeds=np.zeros(4),
    )
    u = ControlInput(np.zeros(4), np.zeros(2))
    initial = float(total_energy(state, model))
    for _ in range(300):
        state = integrator.step(state, u, ExternalWrench.zeros(), 1.0 / 900.0, model, method="rk4")
    assert np.max(np.abs(state.theta)) < model.joint_limit
    assert float(total_energy(state, model)) == pytest.approx(initial, abs=1e-5)


def test_forward_kinematics_straight_arm(params, model):
    state = SystemState.at_rest([1.0, 2.0, 3.0])
    ee = forward_kinematics(state, model)
    drop = params.mount_offset[2] - sum(params.link_lengths)
    np.testing.assert_allclose(ee.position, [1.0, 2.0, 3.0 + drop], atol=1e-12)
    np.testing.assert_allclose(ee.orientation, [1.0, 0.0, 0.0, 0.0], atol=1e-12)


def test_payload_moves_gripper_mass(params):
    loaded = DsamModel.from_params(params, payload_mass=0.1)
    assert float(loaded.ee_mass) == pytest.approx(params.ee_mass + 0.1)
    np.testing.assert_allclose(loaded.ee_inertia, np.asarray(params.ee_inertia) * (0.14 / 0.04))


def test_rejects_non_physical_payload(params):
    with pytest.raises(NonPhysicalModelError):
        DsamModel.from_params(params, payload_mass=-1.0)


def _advanced(state: SystemState, h: float) -> SystemState:
    """Configuration after h seconds at constant generalized velocity"""
    return state.replace(
        p_b=state.p_b + h * state.v_b,
        R_wb=state.R_wb @ so3_exp(h * state.omega_b),
        theta=state.theta + h * state.theta_dot,
    )


@pytest.mark.parametrize("index", range(3))
def test_velocity_products_do_no_work(model, index):
    """v^T (M_dot - 2C) v vanishes: the Coriolis terms are power-neutral"""
    rng = np.random.default_rng(300 + index)
    state = _random_state(rng, index)
    v = state.velocity
    h = 1e-6
    M_dot = (mass_matrix(_advanced(state, h), model) - mass_matrix(_advanced(state, -h), model)) / (2.0 * h)
    lhs = v @ M_dot @ v
    rhs = 2.0 * v @ coriolis_forces(state, model)
    scale = max(1.0, abs(rhs))
    assert lhs == pytest.approx(rhs, abs=1e-5 * scale)


@pytest.mark.parametrize("yaw", [0.7, -2.3])
def test_forward_dynamics_commutes_with_world_yaw(model, yaw):
    """Rotating the world about gravity rotates the linear acceleration and leaves the rest"""
    rng = np.random.default_rng(400)
    state = _random_state(rng, 4)
    u, w = _random_inputs(rng)
    Rz = yaw_rotmat(yaw)
    rotated_state = state.replace(p_b=Rz @ state.p_b, R_wb=Rz @ state.R_wb, v_b=Rz @ state.v_b)
    rotated_wrench = ExternalWrench(force=Rz @ w.force, torque=Rz @ w.torque)

    v_dot = forward_dynamics(state, u, w, model)
    rotated = forward_dynamics(rotated_state, u, rotated_wrench, model)
    np.testing.assert_allclose(rotated[0:3], Rz @ v_dot[0:3], atol=1e-9)
    np.testing.assert_allclose(rotated[3:], v_dot[3:], atol=1e-9)
