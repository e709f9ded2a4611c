"""
Commanded path sampling and the push rig
"""
import numpy as np
import pytest

from src.dynamics.contact import BoxState, PushRig
from src.evaluation.paths import figure8_path, lemniscate, line_path, path_samples, push_path
from src.models.config import PathSpec, PushRigConfig

RATE = 150.0


def test_lemniscate_extents():
    xy = lemniscate(np.linspace(0.0, 2.0 * np.pi, 20001), width=1.0, height=0.5)
    assert xy[:, 0].max() == pytest.approx(0.5, abs=1e-6)
    assert xy[:, 0].min() == pytest.approx(-0.5, abs=1e-6)
    assert xy[:, 1].max() == pytest.approx(0.25, abs=1e-4)


def test_figure8_has_constant_speed():
    spec = PathSpec(settle_s=1.0)
    samples = figure8_path(spec, RATE)
    assert samples.settle_steps == 150
    assert samples.num_steps == 150 + 12 * 150
    moving = samples.poses.position[samples.settle_steps:]
    steps = np.linalg.norm(np.diff(moving, axis=0), axis=-1)
    assert steps.std() / steps.mean() < 0.02
    np.testing.assert_allclose(moving[:, 2], 4.0)
    np.testing.assert_array_equal(samples.poses.position[0], samples.poses.position[samples.settle_steps])


def test_line_path_endpoints_and_speed():
    samples = line_path([0.0, 0.0, 3.0], [0.3, 0.0, 3.0], speed=0.1, rpy_deg=(0.0, 0.0, 0.0),
                        settle_s=0.0, rate_hz=RATE)
    assert samples.num_steps == 450
    np.testing.assert_allclose(samples.poses.position[-1], [0.3, 0.0, 3.0])
    np.testing.assert_allclose(np.diff(samples.poses.position[:, 0]), 0.1 / RATE)


def test_zero_size_figure8_is_a_static_goal():
    samples = path_samples(PathSpec(width=0.0, height=0.0, settle_s=0.5), RATE)
    assert np.ptp(samples.poses.position, axis=0) == pytest.approx(np.zeros(3))
    assert np.ptp(samples.poses.orientation, axis=0) == pytest.approx(np.zeros(4))


def test_push_path_runs_along_world_x():
    rig = PushRigConfig(settle_s=0.0)
    samples = push_path(rig, RATE)
    start = np.asarray(rig.start_position)
    np.testing.assert_allclose(samples.poses.position[-1], start + [rig.path_length, 0.0, 0.0])
    np.testing.assert_allclose(samples.poses.position[:, 1:], np.broadcast_to(start[1:], (samples.num_steps, 2)))


# =============================================================================
# Push rig
# =============================================================================

def test_no_force_without_contact():
    rig = PushRig(PushRigConfig())
    box = rig.initial_box()
    ee = np.array([rig.face_start - 0.01, 0.0, 3.5])
    assert rig.contact_force(ee, np.array([1.0, 0.0, 0.0]), box) == 0.0


def test_reaction_opposes_the_push():
    rig = PushRig(PushRigConfig())
    box = rig.initial_box()
    force = rig.contact_force(np.array([rig.face_start + 0.01, 0.0, 3.5]), np.zeros(3), box)
    assert force == pytest.approx(PushRigConfig().contact_stiffness * 0.01)
    wrench = rig.gripper_wrench(force)
    np.testing.assert_allclose(wrench.force, [-force, 0.0, 0.0])


def test_box_sticks_below_static_friction():
    config = PushRigConfig()
    rig = PushRig(config)
    box = rig.initial_box()
    limit = config.ground_friction_coeff * config.box_mass * 9.81
    for _ in range(100):
        box = rig.step_box(box, np.array(0.5 * limit), 1.0 / 900.0)
    assert box.position == rig.face_start and box.velocity == 0.0


def test_light_frictionless_box_moves():
    rig = PushRig(PushRigConfig(box_mass=0.05, ground_friction_coeff=0.0))
    box = rig.initial_box()
    for _ in range(90):
        box = rig.step_box(box, np.array(0.2), 1.0 / 900.0)
    assert box.position > rig.face_start and box.velocity > 0.0


def test_friction_never_reverses_sliding():
    rig = PushRig(PushRigConfig())
    box = BoxState(np.array(0.0), np.array(0.01))
    for _ in range(200):
        box = rig.step_box(box, np.array(0.0), 1.0 / 900.0)
    assert box.velocity == 0.0 and box.position > 0.0


def test_immovable_box_ignores_force():
    rig = PushRig(PushRigConfig(box_mass=float("inf")))
    box = rig.step_box(rig.initial_box(), np.array(100.0), 1.0 / 900.0)
    assert rig.immovable
    assert box.position == rig.face_start
