"""
Report CSVs, episode archives and plot bundles
"""
import dataclasses
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.errors import ExportError
from src.evaluation.ablation import CURVE_COLUMNS
from src.evaluation.benchmarks import run_pose_benchmark
from src.evaluation.episodes import EpisodeArchive, ScriptedPoseController, load_episode_logs, save_episode_logs
from src.evaluation.export import (
    GOAL_COLUMNS,
    PLOT_COLUMNS,
    SUMMARY_COLUMNS,
    export_report,
    plot_export,
    read_episode_frame,
    read_report,
    recompute_report,
)
from src.models.config import BenchmarkSpec, RunConfig
from src.training.trainer import TRAINING_LOG_COLUMNS

GOLDEN = Path(__file__).parent / "golden"


def _golden(name: str) -> list:
    return (GOLDEN / name).read_text().strip().split(",")


def _assert_same_report(a, b) -> None:
    left, right = a.model_dump(), b.model_dump()
    goals_left, goals_right = left.pop("goals"), right.pop("goals")
    for one, other in [(left, right), *zip(goals_left, goals_right)]:
        assert one.keys() == other.keys()
        for key, value in one.items():
            if isinstance(value, float) and math.isnan(value):
                assert math.isnan(other[key]), key
            else:
                assert other[key] == value, key


@pytest.fixture(scope="module")
def benchmark():
    """Two scripted pose episodes, the second marked as crashed to carry NaN through."""
    spec = BenchmarkSpec(task="pose", goal_count=2, hold_duration_s=0.5, window_s=0.2, seed=9,
                         goal_x_range=(-0.2, 0.2), goal_y_range=(-0.2, 0.2), goal_z_range=(3.0, 3.4))
    _, archive = run_pose_benchmark(ScriptedPoseController(), RunConfig(), spec)
    archive.logs[1] = dataclasses.replace(archive.logs[1], crashed=True)
    return archive


def test_headers_match_golden_files():
    assert GOAL_COLUMNS == _golden("goals_header.csv")
    assert SUMMARY_COLUMNS == _golden("summary_header.csv")
    assert PLOT_COLUMNS == _golden("plot_header.csv")
    assert TRAINING_LOG_COLUMNS == _golden("training_log_header.csv")
    assert CURVE_COLUMNS == ["variant", *_golden("training_log_header.csv")]


def test_report_round_trip_is_exact(benchmark, tmp_path):
    report = recompute_report(benchmark)
    assert report.crashed_count == 1
    paths = export_report(report, tmp_path)
    assert pd.read_csv(paths["goals"]).columns.tolist() == GOAL_COLUMNS
    _assert_same_report(report, read_report(tmp_path, "pose"))


def test_summary_lists_hardware_rows_after_simulation(benchmark, tmp_path):
    paths = export_report(recompute_report(benchmark), tmp_path)
    summary = pd.read_csv(paths["summary"])
    assert summary.columns.tolist() == SUMMARY_COLUMNS
    assert summary["source"].tolist() == ["simulation", "hardware"]
    assert summary.loc[1, "reference_success"] == "10/10"
    assert summary.loc[1, "position_error_mean"] == pytest.approx(0.0536)


def test_saved_logs_recompute_the_same_report(benchmark, tmp_path):
    path = save_episode_logs(benchmark, tmp_path / "pose_episodes.npz")
    loaded = load_episode_logs(path)
    assert loaded.task == "pose"
    assert loaded.meta == benchmark.meta
    np.testing.assert_array_equal(loaded.logs[0].ee_position, benchmark.logs[0].ee_position)
    assert loaded.logs[1].crashed
    _assert_same_report(recompute_report(benchmark), recompute_report(loaded))


def test_plot_bundle(benchmark, tmp_path):
    written = plot_export(benchmark, tmp_path, html=True)
    assert [p.name for p in written] == ["pose_ep0000.csv", "pose_ep0000.html",
                                         "pose_ep0001.csv", "pose_ep0001.html"]
    frame = read_episode_frame(tmp_path / "pose_ep0000.csv")
    log = benchmark.logs[0]
    assert len(frame) == log.num_steps
    np.testing.assert_array_equal(frame[["ee_x", "ee_y", "ee_z"]].to_numpy(), log.ee_position)
    assert frame["box_x"].isna().all()


def test_mismatched_header_is_rejected(benchmark, tmp_path):
    paths = export_report(recompute_report(benchmark), tmp_path)
    goals = pd.read_csv(paths["goals"]).rename(columns={"steps": "num_steps"})
    goals.to_csv(paths["goals"], index=False)
    with pytest.raises(ExportError, match="header"):
        read_report(tmp_path, "pose")


def test_unreadable_archive(tmp_path):
    (tmp_path / "broken.npz").write_bytes(b"not an archive")
    with pytest.raises(ExportError):
        load_episode_logs(tmp_path / "broken.npz")


def test_empty_archive_round_trip(tmp_path):
    archive = EpisodeArchive(task="path", logs=[], meta={"seed": 0})
    loaded = load_episode_logs(save_episode_logs(archive, tmp_path / "empty.npz"))
    assert loaded.task == "path" and loaded.logs == [] and loaded.meta == {"seed": 0}
