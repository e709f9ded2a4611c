"""
Run directories and the SQLite run index
"""
import pytest

from src.storage.config_files import config_fingerprint, load_config
from src.storage.run_store import RunStore


@pytest.fixture
def store(tmp_path):
    store = RunStore(str(tmp_path / "runs"))
    yield store
    store.close()


def test_run_id_is_name_plus_fingerprint(store, config):
    paths = store.create_run(config)
    assert paths.run_id == f"dsam-{config_fingerprint(config)[:10]}"
    for directory in (paths.checkpoints, paths.reports, paths.episodes, paths.plots):
        assert directory.is_dir()
    assert load_config(paths.config) == config
    assert (paths.root / "fingerprint.txt").read_text().strip() == config_fingerprint(config)


def test_same_config_reopens_the_same_run(store, config):
    first = store.create_run(config, kind="eval-pose", extra_fingerprint="abc")
    second = store.create_run(config, kind="eval-pose", extra_fingerprint="abc")
    other = store.create_run(config, kind="eval-pose", extra_fingerprint="xyz")
    assert first.root == second.root != other.root
    assert first.run_id.startswith("dsam-eval-pose-")
    assert len(store.list_runs()) == 2


def test_status_reports_and_failures(store, config, tmp_path):
    paths = store.create_run(config)
    store.mark_status(paths.run_id, "completed")
    assert store.list_runs()[0]["status"] == "completed"

    store.record_report(paths.run_id, "pose", tmp_path / "pose_summary.csv")
    reports = store.get_reports(paths.run_id)
    assert [r["task"] for r in reports] == ["pose"]
    assert store.get_reports("unknown") == []

    store.record_failure(paths.run_id, "ctbr", "PpoInstabilityError", "nan loss", '{"inner_loop": {}}')
    failures = store.get_failures()
    assert failures[0]["variant"] == "ctbr"
    assert failures[0]["error_type"] == "PpoInstabilityError"


def test_reconnects_after_close(store, config):
    store.create_run(config)
    store.close()
    assert len(store.list_runs()) == 1


def test_latest_checkpoint_needs_both_files(store, config):
    paths = store.create_run(config)
    assert paths.latest_checkpoint() is None
    paths.checkpoint(1, "pt").write_bytes(b"x")
    paths.checkpoint(1, "dsamw").write_bytes(b"x")
    paths.checkpoint(2, "pt").write_bytes(b"x")
    assert paths.latest_checkpoint() == paths.checkpoint(1, "pt")
