"""
conftest.py — Shared pytest fixtures.

Small configurations keep the network and training tests fast; default values
are kept wherever a test checks a documented number.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

_PROJECT_ROOT = Path(__file__).resolve().parent
if str(_PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(_PROJECT_ROOT))

from uav_flocking.run_config import RunConfig, parse_run_config


@pytest.fixture(autouse=True)
def _isolated_outputs(tmp_path, monkeypatch):
    """Keep run records and default outputs inside the test's tmp dir."""
    monkeypatch.setattr("uav_flocking.config.RUN_RECORDS_FILE", tmp_path / "logs" / "runs.jsonl")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def default_cfg() -> RunConfig:
    return RunConfig()


@pytest.fixture
def small_cfg(tmp_path) -> RunConfig:
    """Narrow networks, short episodes, small squads."""
    return parse_run_config({
        "seed": 7,
        "output_dir": str(tmp_path / "run"),
        "flock": {"n_min": 3, "n_max": 3},
        "embedding": {"conv1_filters": 8, "conv2_filters": 16, "se_reduction": 4},
        "network": {"ego_units": 8, "hidden_units": [16, 8]},
        "trainer": {
            "episodes": 3,
            "steps_per_episode": 5,
            "batch_size": 4,
            "replay_capacity": 50,
            "checkpoint_every": 2,
            "log_every": 1,
        },
        "evaluation": {"episodes": 2, "steps": 5, "n_values": [2, 3], "train_episodes": 2},
    })


@pytest.fixture
def no_disturbance_cfg(small_cfg) -> RunConfig:
    data = small_cfg.model_dump(mode="json")
    data["disturbance"] = {"sigma_x": 0.0, "sigma_y": 0.0, "sigma_psi": 0.0}
    return parse_run_config(data)
