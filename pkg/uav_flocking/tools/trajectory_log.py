"""
trajectory_log.py — Trajectory CSV read / write.

Format (header row required, one row per UAV per control step, t ≥ 1):

    episode,t,uav_id,role,x,y,psi,phi,v,reward

    role    "leader" (uav_id 0, empty reward) or "follower" (uav_id ≥ 1)
    x, y    m;  psi, phi  rad;  v  m/s
    reward  total reward of the follower for that step
"""

import logging
import math
from pathlib import Path
from typing import Sequence

import pandas as pd

from uav_flocking.dynamics.kinematics import UAVState
from uav_flocking.errors import TrajectoryFormatError
from uav_flocking.eval.metrics import EpisodeLog, StepRecord

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["episode", "t", "uav_id", "role", "x", "y", "psi", "phi", "v", "reward"]
_INT_COLUMNS = ("episode", "t", "uav_id")
_FLOAT_COLUMNS = ("x", "y", "psi", "phi", "v")
LEADER_ID = 0


def logs_to_frame(logs: Sequence[EpisodeLog]) -> pd.DataFrame:
    rows = []
    for log in logs:
        for rec in log.steps:
            lead = rec.leader
            rows.append([log.episode, rec.t, LEADER_ID, "leader",
                         lead.x, lead.y, lead.psi, lead.phi, lead.v, None])
            for uid, f, r in zip(rec.follower_ids, rec.followers, rec.rewards):
                rows.append([log.episode, rec.t, uid, "follower",
                             f.x, f.y, f.psi, f.phi, f.v, float(r)])
    return pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)


def write_trajectory_csv(logs: Sequence[EpisodeLog], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = logs_to_frame(logs)
    df.to_csv(path, index=False)
    logger.info("Trajectory CSV written — path=%s, rows=%d", path, len(df))
    return path


def _parse_int(value: str, column: str, line: int) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise TrajectoryFormatError(f"column {column!r}: expected integer, got {value!r}", line) from None


def _parse_float(value: str, column: str, line: int) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise TrajectoryFormatError(f"column {column!r}: expected number, got {value!r}", line) from None
    if not math.isfinite(out):
        raise TrajectoryFormatError(f"column {column!r}: non-finite value {value!r}", line)
    return out


def read_trajectory_csv(path: str | Path) -> pd.DataFrame:
    """
    Load and validate a trajectory CSV into a typed DataFrame.

    Raises:
        TrajectoryFormatError: wrong header, wrong field count, or a bad value;
            the error carries the 1-based file line number.
    """
    path = Path(path)
    if not path.is_file():
        raise TrajectoryFormatError(f"trajectory file not found: {path}")
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        # pandas skips blank lines; keep the file line of each data row
        data_lines = [n for n, text in enumerate(f, start=2) if text.strip()]
    if header.split(",") != TRAJECTORY_COLUMNS:
        raise TrajectoryFormatError(
            f"header must be {','.join(TRAJECTORY_COLUMNS)}, got {header!r}", line=1
        )
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.ParserError as exc:
        raise TrajectoryFormatError(f"unparsable CSV — {exc}") from exc

    records = []
    for idx, row in enumerate(raw.itertuples(index=False)):
        line = data_lines[idx] if idx < len(data_lines) else idx + 2
        values = dict(zip(TRAJECTORY_COLUMNS, row))
        rec: dict[str, object] = {}
        for col in _INT_COLUMNS:
            rec[col] = _parse_int(values[col], col, line)
        role = values["role"]
        if role not in ("leader", "follower"):
            raise TrajectoryFormatError(f"column 'role': unknown role {role!r}", line)
        rec["role"] = role
        for col in _FLOAT_COLUMNS:
            rec[col] = _parse_float(values[col], col, line)
        reward = values["reward"]
        if role == "leader":
            if reward != "":
                raise TrajectoryFormatError("leader rows must have an empty reward", line)
            rec["reward"] = float("nan")
        else:
            rec["reward"] = _parse_float(reward, "reward", line)
        if rec["t"] < 1:
            raise TrajectoryFormatError(f"column 't': steps start at 1, got {rec['t']}", line)
        records.append(rec)

    df = pd.DataFrame(records, columns=TRAJECTORY_COLUMNS)
    logger.info("Trajectory CSV read — path=%s, rows=%d", path, len(df))
    return df


def frame_to_logs(df: pd.DataFrame) -> list[EpisodeLog]:
    """Rebuild EpisodeLogs from a validated trajectory frame."""
    logs = []
    for episode, ep_df in df.groupby("episode", sort=True):
        log = EpisodeLog(episode=int(episode), seed=0, n_initial=0)
        for t, step_df in ep_df.groupby("t", sort=True):
            leaders = step_df[step_df["role"] == "leader"]
            if len(leaders) != 1:
                raise TrajectoryFormatError(f"episode {episode}, t={t}: expected one leader row")
            followers = step_df[step_df["role"] == "follower"].sort_values("uav_id")
            lead = leaders.iloc[0]
            log.steps.append(StepRecord(
                t=int(t),
                leader=UAVState(lead.x, lead.y, lead.psi, lead.phi, lead.v),
                follower_ids=[int(u) for u in followers["uav_id"]],
                followers=[UAVState(r.x, r.y, r.psi, r.phi, r.v) for r in followers.itertuples()],
                rewards=followers["reward"].to_numpy(dtype=float),
            ))
        log.n_initial = log.steps[0].n if log.steps else 0
        logs.append(log)
    return logs
