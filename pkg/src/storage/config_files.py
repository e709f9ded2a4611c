"""
YAML run-config files and config fingerprints.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Union

import yaml
from pydantic import ValidationError

from src.errors import ConfigError
from src.models.config import RunConfig

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """Tuples to lists, recursively, so yaml.safe_dump can write the dump."""
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def load_config(path: Union[str, Path, None] = None) -> RunConfig:
    """
    Read and validate a run config. No path means all defaults.

    Raises:
        ConfigError: unreadable file, invalid YAML, unknown keys or invalid values
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", str(path)) from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level of a run config must be a mapping", str(path))
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid run config ({exc.error_count()} errors)", str(path), exc.errors()) from exc
    logger.debug("loaded config %s (fingerprint %s)", path, config_fingerprint(config)[:10])
    return config


def apply_overrides(config: RunConfig, overrides: dict, source: str = "overrides") -> RunConfig:
    """with_overrides() with validation errors reported as ConfigError."""
    try:
        return config.with_overrides(overrides)
    except ValidationError as exc:
        raise ConfigError(f"invalid {source} ({exc.error_count()} errors)", source, exc.errors()) from exc


def dump_config(config: RunConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(_plain(config.model_dump()), sort_keys=False))
    return path


def config_fingerprint(config: RunConfig, extra: str = "") -> str:
    """sha256 of the canonical JSON dump (sorted keys) plus an optional suffix."""
    canonical = json.dumps(_plain(config.model_dump()), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256((canonical + extra).encode("utf-8")).hexdigest()
