"""
End-to-end training on a tiny budget: log schema, weight export, resume
"""
import numpy as np
import pandas as pd
import pytest

from src.errors import PpoInstabilityError
from src.evaluation.ablation import run_ablation_suite
from src.policy.weights_io import load_weights
from src.storage.run_store import RunStore
from src.training import trainer as trainer_module
from src.training.trainer import TRAINING_LOG_COLUMNS, Trainer, train

TINY = {
    "name": "tiny",
    "ppo": {
        "num_envs": 8,
        "rollout_length": 8,
        "total_env_steps": 128,
        "hidden_sizes": [16, 16],
        "num_minibatches": 2,
        "num_epochs": 1,
        "checkpoint_interval": 1,
    },
}


@pytest.fixture
def tiny(config):
    return config.with_overrides(TINY)


@pytest.mark.slow
def test_tiny_training_run(tiny, tmp_path):
    store = RunStore(str(tmp_path))
    paths = store.create_run(tiny)
    result = train(tiny, paths, deterministic=True)

    assert result.iterations == 2
    assert result.env_steps == 128
    log = pd.read_csv(result.log_path)
    assert list(log.columns) == TRAINING_LOG_COLUMNS
    assert log["iteration"].tolist() == [1, 2]
    assert log["env_steps"].tolist() == [64, 128]

    weights = load_weights(result.weights_path)
    assert weights.hidden_sizes == (16, 16)
    assert weights.input_dim == 29
    assert paths.latest_checkpoint().name == "iter_000002.pt"
    store.close()


@pytest.mark.slow
def test_resume_continues_from_checkpoint(tiny, tmp_path):
    store = RunStore(str(tmp_path))
    paths = store.create_run(tiny)
    train(tiny, paths, deterministic=True)

    longer = tiny.with_overrides({"ppo": {"total_env_steps": 192}})
    trainer = Trainer(longer, paths, deterministic=True)
    result = trainer.train(resume=True)
    assert result.iterations == 3
    log = pd.read_csv(result.log_path)
    assert log["iteration"].tolist() == [1, 2, 3]
    store.close()


@pytest.mark.slow
def test_resume_without_checkpoint_starts_fresh(tiny, tmp_path):
    store = RunStore(str(tmp_path))
    paths = store.create_run(tiny)
    result = Trainer(tiny, paths, deterministic=True).train(resume=True)
    assert result.iterations == 2
    store.close()


@pytest.mark.slow
def test_same_seed_gives_identical_training_curve(tiny, tmp_path):
    results = []
    for name in ("first", "second"):
        store = RunStore(str(tmp_path / name))
        results.append(train(tiny, store.create_run(tiny), deterministic=True))
        store.close()
    first, second = results
    assert first.log_path.read_text() == second.log_path.read_text()
    a, b = load_weights(first.weights_path), load_weights(second.weights_path)
    for (w_a, b_a), (w_b, b_b) in zip(a.layers, b.layers):
        np.testing.assert_array_equal(w_a, w_b)
        np.testing.assert_array_equal(b_a, b_b)


@pytest.mark.slow
def test_skipped_update_does_not_count_its_steps(tiny, tmp_path, monkeypatch):
    real_update = trainer_module.ppo_update
    calls = {"n": 0}

    def flaky_update(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise PpoInstabilityError("non-finite loss")
        return real_update(*args, **kwargs)

    monkeypatch.setattr(trainer_module, "ppo_update", flaky_update)
    store = RunStore(str(tmp_path))
    result = train(tiny, store.create_run(tiny), deterministic=True)
    assert calls["n"] == 3
    assert result.env_steps == 128
    assert pd.read_csv(result.log_path)["env_steps"].tolist() == [64, 128]
    store.close()


@pytest.mark.slow
def test_no_body_rate_variant_trains_on_26_inputs(tiny, tmp_path):
    store = RunStore(str(tmp_path))
    result = run_ablation_suite(tiny, store, deterministic=True, variants=["no_body_rate"])
    assert result.failures == []
    [run_id] = result.runs.values()
    weights = load_weights(store.run_paths(run_id).policy)
    assert weights.input_dim == 26
    assert set(result.curves["variant"]) == {"no_body_rate"}
    store.close()
