"""
Command line: exit codes and the scripted evaluation path
"""
import pandas as pd
import pytest
import yaml

from src import cli
from src.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, EXIT_WEIGHTS, build_parser, main
from src.evaluation.ablation import run_ablation_suite
from src.training.trainer import TRAINING_LOG_COLUMNS, TrainingResult

QUICK_POSE = {
    "name": "cli",
    "evaluation": {
        "pose": {
            "task": "pose", "goal_count": 1, "hold_duration_s": 0.5, "window_s": 0.2,
            "goal_x_range": [-0.1, 0.1], "goal_y_range": [-0.1, 0.1], "goal_z_range": [3.0, 3.2],
        },
    },
}


@pytest.fixture
def quick_config(tmp_path):
    path = tmp_path / "quick.yaml"
    path.write_text(yaml.safe_dump(QUICK_POSE))
    return path


def test_invalid_config_exits_with_config_code(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("ppo:\n  num_envs: -1\n")
    assert main(["train", "--config", str(path), "--out", str(tmp_path / "runs")]) == EXIT_CONFIG


def test_missing_weights_exit_with_weights_code(quick_config, tmp_path):
    code = main(["eval-pose", "--config", str(quick_config), "--weights", str(tmp_path / "none.dsamw"),
                 "--out", str(tmp_path / "runs")])
    assert code == EXIT_WEIGHTS


def test_corrupt_weights_exit_with_weights_code(quick_config, tmp_path):
    weights = tmp_path / "corrupt.dsamw"
    weights.write_bytes(b"garbage")
    code = main(["eval-pose", "--config", str(quick_config), "--weights", str(weights),
                 "--out", str(tmp_path / "runs")])
    assert code == EXIT_WEIGHTS


def test_eval_requires_a_controller_source():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["eval-pose"])


def test_scripted_eval_then_export(quick_config, tmp_path, capsys):
    runs = tmp_path / "runs"
    code = main(["eval-pose", "--config", str(quick_config), "--scripted", "--no-html", "--out", str(runs)])
    assert code == EXIT_OK
    assert "POSE benchmark" in capsys.readouterr().out

    [episodes] = list(runs.glob("*/episodes/pose_episodes.npz"))
    run_root = episodes.parent.parent
    summary = run_root / "reports" / "pose_summary.csv"
    original = summary.read_text()
    summary.unlink()

    assert main(["export", str(episodes), "--no-html"]) == EXIT_OK
    assert summary.read_text() == original
    assert (run_root / "plots" / "pose" / "pose_ep0000.csv").exists()


def _flat_train(config, paths, deterministic):
    """Every variant logs identical curves"""
    pd.DataFrame([{column: 1.0 for column in TRAINING_LOG_COLUMNS}]).to_csv(paths.training_log, index=False)
    return TrainingResult(paths.policy, paths.training_log, 1, 64)


def test_ablate_check_fails_when_an_ordering_does_not_hold(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(cli, "run_ablation_suite",
                        lambda config, store, **kwargs: run_ablation_suite(config, store, train_fn=_flat_train,
                                                                           **kwargs))
    runs = tmp_path / "runs"
    code = main(["ablate", "--out", str(runs), "--variants", "full", "no_joint_positions", "no_friction_dr",
                 "--check"])
    assert code == EXIT_FAILURE
    assert "Acceptance checks" in capsys.readouterr().out
    [path] = list(runs.glob("*/ablation_checks.csv"))
    assert pd.read_csv(path)["passed"].tolist() == [True, False]
