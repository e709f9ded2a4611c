"""
Ablation suite: train every variant of the matrix with shared seeds and
collect the learning curves on a common env-step axis.

A variant that fails is recorded (like a dead-letter entry) and the suite
moves on; the curves of the variants that finished are still written.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import pandas as pd

from src.errors import ConfigError
from src.models.config import RunConfig
from src.models.results import AblationFailure
from src.storage.config_files import apply_overrides
from src.storage.run_store import RunPaths, RunStore
from src.training.trainer import TRAINING_LOG_COLUMNS, TrainingResult, train

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["variant", *TRAINING_LOG_COLUMNS]
FAILURE_COLUMNS = ["variant", "error_type", "message", "overrides"]

TrainFn = Callable[[RunConfig, RunPaths, bool], TrainingResult]


@dataclass
class AblationResult:
    suite: RunPaths
    curves: pd.DataFrame
    failures: List[AblationFailure] = field(default_factory=list)
    runs: dict = field(default_factory=dict)

    @property
    def curves_path(self) -> Path:
        return self.suite.root / "ablation_curves.csv"

    @property
    def failures_path(self) -> Path:
        return self.suite.root / "ablation_failures.csv"


def variant_config(config: RunConfig, name: str, overrides: dict) -> RunConfig:
    """Base config with the variant overrides, the suite's step budget and a variant-specific name."""
    merged = dict(overrides)
    merged["name"] = f"{config.name}-{name}"
    if config.ablation.total_env_steps is not None:
        merged["ppo"] = {**merged.get("ppo", {}), "total_env_steps": config.ablation.total_env_steps}
    return apply_overrides(config, merged, source=f"ablation variant {name!r}")


def _train(config: RunConfig, paths: RunPaths, deterministic: bool) -> TrainingResult:
    return train(config, paths, deterministic=deterministic)


def run_ablation_suite(config: RunConfig, store: RunStore, deterministic: bool = False,
                       variants: Optional[List[str]] = None, train_fn: TrainFn = _train) -> AblationResult:
    """
    Train each variant of config.ablation (or the named subset).

    Every variant uses config.seed, so environments and initial weights
    match across variants wherever the observation layout allows.
    """
    selected = [v for v in config.ablation.variants if variants is None or v.name in variants]
    if variants is not None:
        unknown = sorted(set(variants) - {v.name for v in selected})
        if unknown:
            raise ConfigError(f"unknown ablation variants: {', '.join(unknown)}")
    suite = store.create_run(config, kind="ablate")
    store.mark_status(suite.run_id, "running")

    frames, failures, runs = [], [], {}
    for variant in selected:
        logger.info("ablation variant %s: %s", variant.name, json.dumps(variant.overrides, sort_keys=True))
        paths = None
        try:
            variant_cfg = variant_config(config, variant.name, variant.overrides)
            paths = store.create_run(variant_cfg, kind="train")
            store.mark_status(paths.run_id, "running")
            result = train_fn(variant_cfg, paths, deterministic)
            store.mark_status(paths.run_id, "completed")
        except Exception as exc:
            logger.error("ablation variant %s failed: %s", variant.name, exc)
            if paths is not None:
                store.mark_status(paths.run_id, "failed")
            failure = AblationFailure(variant=variant.name, error_type=type(exc).__name__,
                                      message=str(exc), overrides=variant.overrides)
            failures.append(failure)
            store.record_failure(suite.run_id, variant.name, failure.error_type, failure.message,
                                 json.dumps(variant.overrides, sort_keys=True))
            continue
        runs[variant.name] = paths.run_id
        frame = pd.read_csv(result.log_path)
        frame.insert(0, "variant", variant.name)
        frames.append(frame)

    curves = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=CURVE_COLUMNS)
    outcome = AblationResult(suite=suite, curves=curves[CURVE_COLUMNS], failures=failures, runs=runs)
    outcome.curves.to_csv(outcome.curves_path, index=False, float_format="%.9g")
    pd.DataFrame(
        [{**f.model_dump(), "overrides": json.dumps(f.overrides, sort_keys=True)} for f in failures],
        columns=FAILURE_COLUMNS,
    ).to_csv(outcome.failures_path, index=False)

    store.mark_status(suite.run_id, "completed" if not failures else "partial")
    logger.info("ablation suite %s: %d finished, %d failed", suite.run_id, len(frames), len(failures))
    return outcome


def final_metric(curves: pd.DataFrame, column: str, last_rows: int = 5) -> pd.Series:
    """Per-variant mean of a curve column over its last iterations."""
    tail = curves.sort_values("iteration").groupby("variant", sort=False).tail(last_rows)
    return tail.groupby("variant", sort=False)[column].mean()
