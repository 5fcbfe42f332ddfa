"""
config.py — Centralized defaults for the UAV flocking simulator and trainer.

Model parameters, training / evaluation defaults, and output paths live here.
`run_config.py` builds its schema defaults from these constants, so import this
module instead of hard-coding values.
"""

import math
import os
from pathlib import Path

from dotenv import load_dotenv

# Load .env from project root (one level up from the package)
_PROJECT_ROOT = Path(__file__).parent.parent
load_dotenv(dotenv_path=_PROJECT_ROOT / ".env")


# ─── Kinematics ───────────────────────────────────────────────────────────────
ALPHA_G: float = 9.8                 # m/s²
R_BD: float = math.pi / 6            # roll-angle setpoint bound, rad
V_MIN: float = 12.0                  # m/s
V_MAX: float = 18.0                  # m/s
TAU_PHI: float = 0.5                 # s
TAU_V: float = 1.0                   # s
PHI_RATE_MAX: float = math.pi / 6    # rad/s
ACCEL_MAX: float = 2.0               # m/s²
DT_INTEGRATE: float = 0.1            # s
CONTROL_PERIOD: float = 1.0          # s

# ─── Disturbances ─────────────────────────────────────────────────────────────
SIGMA_X: float = 0.5                 # m/s
SIGMA_Y: float = 0.5                 # m/s
SIGMA_PSI: float = 0.05              # rad/s


# ─── Actions ──────────────────────────────────────────────────────────────────
ROLL_ACTION_MAX: float = math.pi / 18
SPEED_ACTION_MAX: float = 1.0


# ─── Reward ───────────────────────────────────────────────────────────────────
D1: float = 40.0
D2: float = 65.0
OMEGA: float = 0.05
M_GAIN: float = 2.0
COLLISION_THRESHOLD: float = 2.0     # m


# ─── Flock ────────────────────────────────────────────────────────────────────
N_MIN: int = 3
N_MAX: int = 10
SPAWN_MAX_TRIES: int = 1000
LEADER_CRUISE_SPEED: float = 15.0
WAYPOINT_ACCEPT_RADIUS: float = 30.0
LEADER_HEADING_GAIN: float = 1.0


# ─── Embedding / networks ─────────────────────────────────────────────────────
CONV1_FILTERS: int = 32
CONV2_FILTERS: int = 64              # = embedding length
SE_REDUCTION: int = 8
EGO_DENSE_UNITS: int = 64
HIDDEN_UNITS: tuple[int, int] = (128, 64)


# ─── Training ─────────────────────────────────────────────────────────────────
EPISODES: int = 30000
STEPS_PER_EPISODE: int = 60
BATCH_SIZE: int = 64
GAMMA: float = 0.95
LR_ACTOR: float = 0.001
LR_CRITIC: float = 0.0001
REPLAY_CAPACITY: int = 100000
SIGMA_START: float = 0.5
SIGMA_END: float = 0.05
SIGMA_DECAY_EPISODES: int = 2000
CHECKPOINT_EVERY: int = 1000
LOG_EVERY: int = 10


# ─── Evaluation ───────────────────────────────────────────────────────────────
EVAL_EPISODES: int = 200
EVAL_STEPS: int = 180
TRAIN_EVAL_EPISODES: int = 100       # rolling window during training
EVAL_N_VALUES: tuple[int, ...] = (4, 6, 8, 10)


# ─── Runtime ──────────────────────────────────────────────────────────────────
LOG_LEVEL: str = os.getenv("UAV_FLOCKING_LOG_LEVEL", "INFO")
EVAL_WORKERS: int = int(os.getenv("UAV_FLOCKING_WORKERS", "1"))


# ─── Paths ────────────────────────────────────────────────────────────────────
OUTPUT_DIR: Path = Path(os.getenv("UAV_FLOCKING_OUTPUT_DIR", str(_PROJECT_ROOT / "runs")))
LOGS_DIR: Path = Path(os.getenv("UAV_FLOCKING_LOGS_DIR", str(_PROJECT_ROOT / "logs")))
LOG_FILE: Path = LOGS_DIR / "uav_flocking.log"
RUN_RECORDS_FILE: Path = LOGS_DIR / "runs.jsonl"
