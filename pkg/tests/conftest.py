"""
Shared fixtures for the DSAM test suite
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.dynamics.model import DsamModel
from src.models.config import ModelParams, RunConfig


@pytest.fixture
def config() -> RunConfig:
    return RunConfig()


@pytest.fixture
def params() -> ModelParams:
    return ModelParams()


@pytest.fixture
def model(params) -> DsamModel:
    return DsamModel.from_params(params)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
