"""
Benchmark harness driven by the scripted base controller
"""
import math

import numpy as np
import pytest

from src.evaluation.benchmarks import (
    run_path_benchmark,
    run_payload_benchmark,
    run_payload_sweep,
    run_pose_benchmark,
    run_push_benchmark,
)
from src.evaluation.episodes import ScriptedPoseController
from src.models.config import BenchmarkSpec, PathSpec, PushRigConfig

NEAR_SPAWN = dict(goal_count=2, hold_duration_s=1.0, window_s=0.5, seed=4,
                  goal_x_range=(-0.2, 0.2), goal_y_range=(-0.2, 0.2), goal_z_range=(3.0, 3.4))


@pytest.fixture
def scripted() -> ScriptedPoseController:
    return ScriptedPoseController()


def _same_logs(a, b) -> None:
    assert len(a.logs) == len(b.logs)
    for left, right in zip(a.logs, b.logs):
        np.testing.assert_array_equal(left.ee_position, right.ee_position)
        np.testing.assert_array_equal(left.goal_orientation, right.goal_orientation)
        assert left.crashed == right.crashed


def test_pose_benchmark_shapes(scripted, config):
    spec = BenchmarkSpec(task="pose", **NEAR_SPAWN)
    report, archive = run_pose_benchmark(scripted, config, spec)
    assert report.task == "pose"
    assert report.goal_count == 2 and len(archive.logs) == 2
    assert report.crashed_count == 0
    assert all(log.num_steps == 150 for log in archive.logs)
    assert all(np.isfinite(goal.position_error_mean) for goal in report.goals)
    assert math.isnan(report.inference_latency_ms)
    assert archive.meta["scoring"] == "window"


def test_goals_are_seeded_per_index(scripted, config):
    spec = BenchmarkSpec(task="pose", **NEAR_SPAWN)
    first, _ = run_pose_benchmark(scripted, config, spec)
    again, _ = run_pose_benchmark(scripted, config, spec)
    assert [g.goal_x for g in first.goals] == [g.goal_x for g in again.goals]
    assert first.goals[0].goal_x != first.goals[1].goal_x


def test_parallel_matches_sequential(scripted, config):
    sequential = BenchmarkSpec(task="pose", **NEAR_SPAWN)
    parallel = sequential.model_copy(update={"parallel": True})
    _, a = run_pose_benchmark(scripted, config, sequential)
    _, b = run_pose_benchmark(scripted, config, parallel)
    _same_logs(a, b)


def test_zero_payload_reproduces_pose_benchmark(scripted, config):
    pose, pose_logs = run_pose_benchmark(scripted, config, BenchmarkSpec(task="pose", **NEAR_SPAWN))
    payload, payload_logs = run_payload_benchmark(
        scripted, config, BenchmarkSpec(task="payload", payload_mass=0.0, **NEAR_SPAWN))
    _same_logs(pose_logs, payload_logs)
    assert payload.position_error_mean == pose.position_error_mean


def test_payload_sweep_keeps_goals(scripted, config):
    spec = BenchmarkSpec(task="payload", **NEAR_SPAWN)
    results = run_payload_sweep(scripted, config, payloads=[0.05, 0.14], spec=spec)
    assert [report.payload_mass for report, _ in results] == [0.05, 0.14]
    assert [g.goal_x for g in results[0][0].goals] == [g.goal_x for g in results[1][0].goals]
    assert all(log.payload_mass == 0.14 for log in results[1][1].logs)


def test_immovable_box_does_not_move(scripted, config):
    rig = PushRigConfig(box_mass=float("inf"), path_length=0.1, ee_speed=0.1, settle_s=0.5,
                        start_position=(0.0, 0.0, 3.3))
    spec = BenchmarkSpec(task="push", goal_count=1, hold_duration_s=1.0, window_s=0.5, push=rig)
    report, archive = run_push_benchmark(scripted, config, spec)
    assert archive.logs[0].num_steps == 75 + 150
    assert archive.logs[0].settle_steps == 75
    assert report.box_displacement == 0.0


def test_path_benchmark_scores_after_settling(scripted, config):
    path = PathSpec(kind="line", line_start=(-0.1, 0.0, 3.3), line_end=(0.1, 0.0, 3.3), ee_speed=0.2,
                    settle_s=0.5)
    spec = BenchmarkSpec(task="path", goal_count=1, hold_duration_s=1.0, window_s=0.5, path=path)
    report, archive = run_path_benchmark(scripted, config, spec)
    log = archive.logs[0]
    assert log.settle_steps == 75 and log.num_steps == 75 + 150
    np.testing.assert_allclose(log.goal_position[0], [-0.1, 0.0, 3.3], atol=1e-12)
    np.testing.assert_allclose(log.goal_position[-1], [0.1, 0.0, 3.3], atol=1e-12)
    assert np.isfinite(report.position_rmse) and report.position_rmse >= 0.0
    assert math.isnan(report.box_displacement)


@pytest.mark.slow
def test_scripted_controller_reaches_goal_positions(scripted, config):
    """The harness check: a level gripper is driven to the goal position"""
    spec = BenchmarkSpec(task="pose", goal_count=3, hold_duration_s=6.0, window_s=2.0, seed=1,
                         goal_x_range=(-0.5, 0.5), goal_y_range=(-0.5, 0.5), goal_z_range=(3.0, 4.0))
    report, _ = run_pose_benchmark(scripted, config, spec)
    assert report.crashed_count == 0
    assert report.position_error_mean < 0.15


@pytest.mark.slow
def test_light_box_is_pushed_forward(scripted, config):
    rig = PushRigConfig(box_mass=0.05, ground_friction_coeff=0.2, face_offset=0.03, path_length=0.2,
                        ee_speed=0.1, settle_s=0.5, start_position=(0.0, 0.0, 3.3))
    spec = BenchmarkSpec(task="push", goal_count=1, hold_duration_s=1.0, window_s=0.5, push=rig)
    report, archive = run_push_benchmark(scripted, config, spec)
    assert report.crashed_count == 0
    assert archive.logs[0].num_steps == 75 + 300
    assert report.box_displacement > 0.0
