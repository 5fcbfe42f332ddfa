"""
run_config.py — Schema-validated run configuration.

A RunConfig is a JSON document with one object per section:

    {
      "seed": 0,
      "output_dir": "runs/default",
      "kinematics":  {"alpha_g": 9.8, "v_min": 12.0, ...},
      "disturbance": {"sigma_x": 0.5, ...},
      "reward":      {"d1": 40.0, "d2": 65.0, ...},
      "flock":       {"n_min": 3, "n_max": 10, ...},
      "embedding":   {"conv1_filters": 32, "conv2_filters": 64, ...},
      "network":     {"ego_units": 64, "hidden_units": [128, 64]},
      "trainer":     {"episodes": 30000, ...},
      "evaluation":  {"episodes": 200, ...}
    }

Every section rejects unknown keys. Omitted keys take the defaults
from config.py.
"""

import hashlib
import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from uav_flocking import config as defaults
from uav_flocking.errors import ConfigError

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ─── Kinematics ───────────────────────────────────────────────────────────────

class KinematicsConfig(_Section):
    alpha_g: float = Field(defaults.ALPHA_G, gt=0)
    tau_phi: float = Field(defaults.TAU_PHI, gt=0)
    tau_v: float = Field(defaults.TAU_V, gt=0)
    phi_rate_max: float = Field(defaults.PHI_RATE_MAX, gt=0)
    accel_max: float = Field(defaults.ACCEL_MAX, gt=0)
    dt_integrate: float = Field(defaults.DT_INTEGRATE, gt=0)
    control_period: float = Field(defaults.CONTROL_PERIOD, gt=0)
    v_min: float = Field(defaults.V_MIN, gt=0)
    v_max: float = Field(defaults.V_MAX, gt=0)
    r_bd: float = Field(defaults.R_BD, gt=0, lt=math.pi / 2)

    @model_validator(mode="after")
    def _check(self) -> "KinematicsConfig":
        ratio = self.control_period / self.dt_integrate
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("control_period must be an integer multiple of dt_integrate")
        if self.v_min >= self.v_max:
            raise ValueError("v_min must be smaller than v_max")
        if self.dt_integrate > min(self.tau_phi, self.tau_v):
            raise ValueError("dt_integrate must not exceed tau_phi or tau_v")
        return self

    @property
    def substeps(self) -> int:
        return int(round(self.control_period / self.dt_integrate))


class DisturbanceConfig(_Section):
    sigma_x: float = Field(defaults.SIGMA_X, ge=0)
    sigma_y: float = Field(defaults.SIGMA_Y, ge=0)
    sigma_psi: float = Field(defaults.SIGMA_PSI, ge=0)
    apply_in_training: bool = True
    apply_in_evaluation: bool = True


# ─── Reward / flock ───────────────────────────────────────────────────────────

class RewardConfig(_Section):
    d1: float = Field(defaults.D1, gt=0)
    d2: float = Field(defaults.D2, gt=0)
    omega: float = Field(defaults.OMEGA, gt=0)
    m: float = Field(defaults.M_GAIN, gt=0)
    collision_threshold: float = Field(defaults.COLLISION_THRESHOLD, gt=0)

    @model_validator(mode="after")
    def _check(self) -> "RewardConfig":
        if not self.d1 < self.d2:
            raise ValueError("d1 must be smaller than d2")
        if not self.collision_threshold < self.d1:
            raise ValueError("collision_threshold must be smaller than d1")
        return self


class LeaderMode(str, Enum):
    RANDOM = "random"
    WAYPOINTS = "waypoints"


class LeaderSpeedMode(str, Enum):
    CONSTANT = "constant"
    RANDOM = "random"


class FlockConfig(_Section):
    n_min: int = Field(defaults.N_MIN, ge=1)
    n_max: int = Field(defaults.N_MAX, ge=1)
    spawn_inner: float | None = None         # defaults to reward.d1
    spawn_outer: float | None = None         # defaults to reward.d2
    min_spawn_spacing: float | None = None   # defaults to 5 × collision_threshold
    spawn_max_tries: int = Field(defaults.SPAWN_MAX_TRIES, ge=1)
    leader_mode: LeaderMode = LeaderMode.RANDOM
    waypoints: list[tuple[float, float]] = Field(default_factory=list)
    waypoint_accept_radius: float = Field(defaults.WAYPOINT_ACCEPT_RADIUS, gt=0)
    leader_heading_gain: float = Field(defaults.LEADER_HEADING_GAIN, gt=0)
    leader_speed_mode: LeaderSpeedMode = LeaderSpeedMode.CONSTANT
    leader_cruise_speed: float = Field(defaults.LEADER_CRUISE_SPEED, gt=0)

    @model_validator(mode="after")
    def _check(self) -> "FlockConfig":
        if self.n_min > self.n_max:
            raise ValueError("n_min must not exceed n_max")
        if self.leader_mode is LeaderMode.WAYPOINTS and not self.waypoints:
            raise ValueError("waypoints leader mode needs a non-empty waypoints list")
        if (self.spawn_inner is not None and self.spawn_outer is not None
                and self.spawn_inner > self.spawn_outer):
            raise ValueError("spawn_inner must not exceed spawn_outer")
        return self


# ─── Networks ─────────────────────────────────────────────────────────────────

class EmbeddingVariant(str, Enum):
    SEMP = "SEMP"
    CNNMP = "CNNMP"


class EmbeddingConfig(_Section):
    conv1_filters: int = Field(defaults.CONV1_FILTERS, ge=1)
    conv2_filters: int = Field(defaults.CONV2_FILTERS, ge=1)
    se_reduction: int = Field(defaults.SE_REDUCTION, ge=1)
    variant: EmbeddingVariant = EmbeddingVariant.SEMP

    @model_validator(mode="after")
    def _check(self) -> "EmbeddingConfig":
        if self.variant is EmbeddingVariant.SEMP:
            for name in ("conv1_filters", "conv2_filters"):
                if getattr(self, name) % self.se_reduction:
                    raise ValueError(f"{name} must be divisible by se_reduction")
        return self


class NetworkConfig(_Section):
    ego_units: int = Field(defaults.EGO_DENSE_UNITS, ge=1)
    hidden_units: tuple[int, int] = defaults.HIDDEN_UNITS


# ─── Training / evaluation ────────────────────────────────────────────────────

class TrainerConfig(_Section):
    episodes: int = Field(defaults.EPISODES, ge=0)
    steps_per_episode: int = Field(defaults.STEPS_PER_EPISODE, ge=1)
    batch_size: int = Field(defaults.BATCH_SIZE, ge=1)
    gamma: float = Field(defaults.GAMMA, gt=0, lt=1)
    lr_actor: float = Field(defaults.LR_ACTOR, gt=0)
    lr_critic: float = Field(defaults.LR_CRITIC, gt=0)
    replay_capacity: int = Field(defaults.REPLAY_CAPACITY, ge=1)
    sigma_start: float = Field(defaults.SIGMA_START, ge=0)
    sigma_end: float = Field(defaults.SIGMA_END, ge=0)
    sigma_decay_episodes: int = Field(defaults.SIGMA_DECAY_EPISODES, ge=1)
    warmup: int | None = None                # defaults to batch_size
    checkpoint_every: int = Field(defaults.CHECKPOINT_EVERY, ge=1)
    log_every: int = Field(defaults.LOG_EVERY, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "TrainerConfig":
        if self.sigma_end > self.sigma_start:
            raise ValueError("sigma_end must not exceed sigma_start (σ is non-increasing)")
        if self.sigma_end == 0 and self.sigma_start > 0:
            raise ValueError("sigma_end must be positive for exponential annealing")
        if self.batch_size > self.replay_capacity:
            raise ValueError("batch_size must not exceed replay_capacity")
        return self

    @property
    def effective_warmup(self) -> int:
        return max(self.batch_size, self.warmup or 0)


class EvalConfig(_Section):
    episodes: int = Field(defaults.EVAL_EPISODES, ge=1)
    steps: int = Field(defaults.EVAL_STEPS, ge=1)
    train_episodes: int = Field(defaults.TRAIN_EVAL_EPISODES, ge=1)
    n_values: tuple[int, ...] = defaults.EVAL_N_VALUES
    collision_threshold: float = Field(defaults.COLLISION_THRESHOLD, gt=0)
    workers: int = Field(defaults.EVAL_WORKERS, ge=1)

    @model_validator(mode="after")
    def _check(self) -> "EvalConfig":
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise ValueError("n_values must be a non-empty list of positive counts")
        return self


# ─── Run configuration ────────────────────────────────────────────────────────

class RunConfig(_Section):
    seed: int = Field(0, ge=0)
    output_dir: str = str(defaults.OUTPUT_DIR / "default")
    kinematics: KinematicsConfig = Field(default_factory=KinematicsConfig)
    disturbance: DisturbanceConfig = Field(default_factory=DisturbanceConfig)
    reward: RewardConfig = Field(default_factory=RewardConfig)
    flock: FlockConfig = Field(default_factory=FlockConfig)
    embedding: EmbeddingConfig = Field(default_factory=EmbeddingConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    trainer: TrainerConfig = Field(default_factory=TrainerConfig)
    evaluation: EvalConfig = Field(default_factory=EvalConfig)

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        inner, outer = self.spawn_annulus
        if inner < self.reward.collision_threshold:
            raise ValueError("spawn annulus must lie outside the collision threshold")
        if inner > outer:
            raise ValueError("spawn annulus inner radius exceeds outer radius")
        return self

    @property
    def spawn_annulus(self) -> tuple[float, float]:
        inner = self.flock.spawn_inner if self.flock.spawn_inner is not None else self.reward.d1
        outer = self.flock.spawn_outer if self.flock.spawn_outer is not None else self.reward.d2
        return inner, outer

    @property
    def min_spawn_spacing(self) -> float:
        if self.flock.min_spawn_spacing is not None:
            return self.flock.min_spawn_spacing
        return 5.0 * self.reward.collision_threshold


# ─── Loading / saving ─────────────────────────────────────────────────────────

def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "<root>"
        parts.append(f"{loc}: {err.get('msg')}")
    return "; ".join(parts)


def parse_run_config(data: dict[str, Any]) -> RunConfig:
    """Validate a plain dict into a RunConfig, raising ConfigError with field paths."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid run config — {_format_validation_error(exc)}") from exc


def load_run_config(path: str | Path | None) -> RunConfig:
    """
    Load a RunConfig from a JSON file. `None` yields the all-defaults config.

    Raises:
        ConfigError: file missing, not JSON, or failing validation.
    """
    if path is None:
        logger.info("No config file given — using defaults")
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    cfg = parse_run_config(data)
    logger.info("Run config loaded from %s (digest=%s)", path, config_digest(cfg)[:12])
    return cfg


def dump_run_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True)


def save_run_config(cfg: RunConfig, path: str | Path) -> Path:
    """Write the fully-resolved config as JSON; re-parses to an identical RunConfig."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_run_config(cfg) + "\n", encoding="utf-8")
    return path


def config_digest(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# Flat CLI override name → (section, field)
_OVERRIDES: dict[str, tuple[str | None, str]] = {
    "seed": (None, "seed"),
    "output_dir": (None, "output_dir"),
    "episodes": ("trainer", "episodes"),
    "steps": ("trainer", "steps_per_episode"),
    "batch_size": ("trainer", "batch_size"),
    "variant": ("embedding", "variant"),
    "n_min": ("flock", "n_min"),
    "n_max": ("flock", "n_max"),
    "eval_episodes": ("evaluation", "episodes"),
    "eval_steps": ("evaluation", "steps"),
    "workers": ("evaluation", "workers"),
}


def apply_overrides(cfg: RunConfig, **overrides: Any) -> RunConfig:
    """
    Return a new RunConfig with flat overrides applied (None values are ignored).

    Example:
        apply_overrides(cfg, episodes=10, seed=3)
    """
    data = cfg.model_dump(mode="json")
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _OVERRIDES:
            raise ConfigError(f"unknown override: {key}")
        section, field = _OVERRIDES[key]
        target = data if section is None else data[section]
        target[field] = value
        logger.debug("Override applied — %s=%r", key, value)
    return parse_run_config(data)
