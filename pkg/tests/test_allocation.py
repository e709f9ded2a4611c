"""
Rotor actuators and control allocation
"""
import numpy as np
import pytest

from src.control.allocation import allocate, allocated_wrench, allocation_matrix
from src.dynamics.actuators import joint_actuator, rotor_thrusts, rotor_wrench, update_joint_integral
from src.dynamics.model import DsamModel, mass_matrix
from src.models.state import SystemState


def test_thrust_is_quadratic_in_speed(model):
    np.testing.assert_allclose(rotor_thrusts(np.array([1000.0, 2000.0]), model), [1.0, 4.0])


def test_equal_speeds_give_pure_thrust(params, model):
    thrust, torque = rotor_wrench(np.full(4, params.hover_rotor_speed), model)
    assert thrust == pytest.approx(params.nominal_mass * params.gravity)
    np.testing.assert_allclose(torque, 0.0, atol=1e-12)


def test_allocation_matrix_is_invertible(model):
    assert abs(np.linalg.det(allocation_matrix(model))) > 1e-8


def test_feasible_request_is_delivered_exactly(params, model):
    collective = params.nominal_mass * params.gravity
    torque = np.array([0.02, -0.015, 0.004])
    thrust, delivered = allocated_wrench(allocate(collective, torque, model), model)
    assert thrust == pytest.approx(collective)
    np.testing.assert_allclose(delivered, torque, atol=1e-10)


def test_saturation_drops_yaw_before_tilt(params, model):
    """Thrust and roll/pitch survive; the yaw request is scaled down"""
    collective = params.nominal_mass * params.gravity
    torque = np.array([0.05, 0.0, 0.5])
    speeds = allocate(collective, torque, model)
    thrust, delivered = allocated_wrench(speeds, model)
    assert thrust == pytest.approx(collective, rel=1e-9)
    assert delivered[0] == pytest.approx(0.05, rel=1e-9)
    assert 0.0 <= delivered[2] < 0.5
    assert np.all(speeds >= params.rotor_speed_limits[0])
    assert np.all(speeds <= params.rotor_speed_limits[1] + 1e-9)


def test_speeds_stay_in_limits_for_any_request(rng, params, model):
    collective = rng.uniform(0.0, 50.0, 200)
    torque = rng.normal(scale=1.0, size=(200, 3))
    speeds = allocate(collective, torque, model)
    assert np.all(np.isfinite(speeds))
    assert np.all(speeds >= params.rotor_speed_limits[0])
    assert np.all(speeds <= params.rotor_speed_limits[1] + 1e-9)


def test_joint_servo_torque_is_clamped(params, model):
    torque = joint_actuator(np.array([1.5, -1.5]), np.array([-1.5, 1.5]), np.zeros(2), model)
    np.testing.assert_allclose(torque, [params.joint_torque_limit, -params.joint_torque_limit])


def test_joint_servo_friction_opposes_motion(model):
    torque = joint_actuator(np.zeros(2), np.zeros(2), np.array([0.5, -0.5]), model)
    assert torque[0] < 0 < torque[1]


def _joint_inertia(model):
    return mass_matrix(SystemState.at_rest(np.zeros(3)), model)[6, 6]


def _servo_response(model, step, load=0.0, seconds=1.0, dt=1.0 / 900.0):
    """Both joints driven by the servo against a rigid inertia and a constant load torque"""
    inertia = _joint_inertia(model)
    ref = np.full(2, step)
    theta, rate, integral = np.zeros(2), np.zeros(2), np.zeros(2)
    trace = []
    for _ in range(round(seconds / dt)):
        integral = update_joint_integral(integral, ref, theta, dt, model)
        torque = joint_actuator(ref, theta, rate, model, integral)
        rate = rate + dt * (torque - load) / inertia
        theta = theta + dt * rate
        trace.append(theta.copy())
    return np.array(trace)


def test_joint_servo_settles_within_a_quarter_second(model):
    dt = 1.0 / 900.0
    step = 0.25
    trace = _servo_response(model, step, seconds=0.6, dt=dt)
    outside = np.nonzero(np.any(np.abs(trace - step) > 0.05 * step, axis=1))[0]
    assert outside.size > 0
    assert (outside[-1] + 1) * dt < 0.25


def test_integral_stays_zero_without_gain(model):
    integral = update_joint_integral(np.array([0.3, -0.3]), np.ones(2), np.zeros(2), 0.01, model)
    np.testing.assert_array_equal(integral, 0.0)


def test_integral_is_clamped_to_the_torque_limit(params):
    model = DsamModel.from_params(params.model_copy(update={"joint_integral_gain": 20.0}))
    integral = np.zeros(2)
    for _ in range(1000):
        integral = update_joint_integral(integral, np.array([1.0, -1.0]), np.zeros(2), 0.01, model)
    bound = params.joint_torque_limit / 20.0
    np.testing.assert_allclose(integral, [bound, -bound])


def test_integral_gain_removes_steady_state_droop(params, model):
    """A constant load leaves a proportional droop that only the integral term removes"""
    load = 0.05
    step = 0.3
    proportional = _servo_response(model, step, load=load, seconds=3.0)
    with_integral = _servo_response(
        DsamModel.from_params(params.model_copy(update={"joint_integral_gain": 20.0})),
        step, load=load, seconds=3.0,
    )
    tail = slice(-450, None)
    droop = np.abs(step - proportional[tail]).mean()
    residual = np.abs(step - with_integral[tail]).mean()
    assert droop == pytest.approx(load / params.joint_stiffness, rel=0.15)
    assert residual < 2e-3
