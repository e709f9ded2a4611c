"""
Fixed-step integration: joint stops, rotor lag, divergence handling
"""
import numpy as np
import pytest

from src.dynamics import integrator
from src.errors import DivergenceError
from src.geometry.se3 import check_rotation
from src.models.state import ControlInput, ExternalWrench, SystemState

DT = 1.0 / 900.0


def test_joint_stop_clamps_and_zeroes_rate(model):
    state = SystemState.at_rest([0.0, 0.0, 3.0], theta=[model.joint_limit - 1e-4, 0.0]).replace(
        theta_dot=np.array([2.0, 0.0])
    )
    stepped = integrator.step(state, ControlInput(np.zeros(4), np.zeros(2)), ExternalWrench.zeros(), DT, model)
    assert stepped.theta[0] == pytest.approx(model.joint_limit)
    assert stepped.theta_dot[0] == 0.0


def test_rotor_lag_is_first_order(params, model):
    hover = params.hover_rotor_speed
    state = SystemState.at_rest([0.0, 0.0, 3.0], hover)
    u = ControlInput(np.full(4, hover + 300.0), np.zeros(2))
    stepped = integrator.step(state, u, ExternalWrench.zeros(), DT, model)
    expected = hover + DT / params.rotor_time_constant * 300.0
    np.testing.assert_allclose(stepped.rotor_speeds, expected)


def test_rotor_command_clamped_to_limits(params, model):
    state = SystemState.at_rest([0.0, 0.0, 3.0], params.rotor_speed_limits[1])
    u = ControlInput(np.full(4, 1e6), np.zeros(2))
    stepped = integrator.step(state, u, ExternalWrench.zeros(), DT, model)
    assert np.all(stepped.rotor_speeds <= params.rotor_speed_limits[1])


def test_divergence_reports_offending_rows(model):
    calm = SystemState.at_rest([0.0, 0.0, 3.0])
    wild = calm.replace(v_b=np.array([5e3, 0.0, 0.0]))
    batch = SystemState.stack([calm, wild])
    u = ControlInput(np.zeros((2, 4)), np.zeros((2, 2)))
    with pytest.raises(DivergenceError) as info:
        integrator.step(batch, u, ExternalWrench.zeros((2,)), DT, model)
    np.testing.assert_array_equal(info.value.mask, [False, True])
    assert np.all(np.isfinite(info.value.state.p_b[0]))


@pytest.mark.parametrize("method", ["semi_implicit", "rk4"])
def test_rotation_stays_orthonormal(model, method):
    state = SystemState.at_rest([0.0, 0.0, 3.0]).replace(omega_b=np.array([3.0, -2.0, 5.0]))
    u = ControlInput(np.zeros(4), np.zeros(2))
    for _ in range(900):
        state = integrator.step(state, u, ExternalWrench.zeros(), DT, model, method=method)
    check_rotation(state.R_wb)


def test_semi_implicit_free_fall_close_to_exact(model):
    state = SystemState.at_rest([0.0, 0.0, 3.0])
    u = ControlInput(np.zeros(4), np.zeros(2))
    for _ in range(90):
        state = integrator.step(state, u, ExternalWrench.zeros(), DT, model)
    assert 3.0 - state.p_b[2] == pytest.approx(0.04905, rel=2e-2)
    assert state.v_b[2] == pytest.approx(-0.981, rel=1e-9)
