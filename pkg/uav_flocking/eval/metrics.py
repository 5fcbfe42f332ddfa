"""
metrics.py — Episode logs and the flocking metrics computed from them.

  - average reward G_Avg : mean reward over every (episode, follower, step) sample
  - collision rate       : percentage of (step, unordered follower pair) samples
                           closer than the collision threshold
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from uav_flocking.dynamics.kinematics import UAVState
from uav_flocking.env.environment import encode_joint_e, encode_joint_o, pairwise_distances, total_reward
from uav_flocking.errors import MetricsError
from uav_flocking.run_config import RewardConfig

logger = logging.getLogger(__name__)


# ─── Logs ─────────────────────────────────────────────────────────────────────

@dataclass
class StepRecord:
    """States and rewards right after control step `t` (t ≥ 1)."""

    t: int
    leader: UAVState
    follower_ids: list[int]
    followers: list[UAVState]
    rewards: np.ndarray

    def __post_init__(self) -> None:
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        if not (len(self.follower_ids) == len(self.followers) == len(self.rewards)):
            raise MetricsError(f"step {self.t}: follower ids, states and rewards differ in length")

    @property
    def n(self) -> int:
        return len(self.followers)

    def leader_distances(self) -> np.ndarray:
        return np.array(
            [math.hypot(f.x - self.leader.x, f.y - self.leader.y) for f in self.followers],
            dtype=np.float64,
        )


@dataclass
class EpisodeLog:
    episode: int
    seed: int
    n_initial: int
    policy_id: str = "SEMP"
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def num_steps(self) -> int:
        return len(self.steps)

    def reward_samples(self) -> np.ndarray:
        if not self.steps:
            return np.zeros(0, dtype=np.float64)
        return np.concatenate([s.rewards for s in self.steps])

    def mean_leader_distance(self) -> float:
        """Mean leader–follower distance ρ over all (step, follower) samples."""
        dists = [s.leader_distances() for s in self.steps if s.n]
        return float(np.mean(np.concatenate(dists))) if dists else float("nan")


# ─── Average reward ───────────────────────────────────────────────────────────

def average_reward(logs: Sequence[EpisodeLog], n: int, episodes: int, steps: int) -> float:
    """
    G_Avg = Σ r / (n · episodes · steps) for logs of a fixed-size squad.

    Raises:
        MetricsError: the logs do not hold exactly `episodes` episodes of `steps`
            steps with `n` follower rewards each. Nothing is imputed.
    """
    if len(logs) != episodes:
        raise MetricsError(f"expected {episodes} episode logs, got {len(logs)}")
    total = 0.0
    for log in logs:
        if log.num_steps != steps:
            raise MetricsError(f"episode {log.episode}: expected {steps} steps, got {log.num_steps}")
        for rec in log.steps:
            if rec.n != n:
                raise MetricsError(
                    f"episode {log.episode}, step {rec.t}: expected {n} rewards, got {rec.n}"
                )
            total += float(np.sum(rec.rewards))
    return total / (n * episodes * steps)


def mean_reward(logs: Sequence[EpisodeLog]) -> float:
    """Mean over every logged (follower, step) reward; handles squads that grow mid-episode."""
    samples = [log.reward_samples() for log in logs]
    flat = np.concatenate(samples) if samples else np.zeros(0)
    if flat.size == 0:
        raise MetricsError("no reward samples in logs")
    return float(np.mean(flat))


def recompute_rewards(rec: StepRecord, cfg: RewardConfig) -> np.ndarray:
    """Rewards of one step rebuilt from the logged states alone."""
    rewards = np.empty(rec.n, dtype=np.float64)
    for i, ego in enumerate(rec.followers):
        # Setpoints do not enter the reward; any placeholder works
        se = encode_joint_e(ego, rec.leader, (0.0, rec.leader.v))
        so = encode_joint_o(ego, rec.followers[:i] + rec.followers[i + 1:])
        rewards[i] = total_reward(se, so, cfg)
    return rewards


# ─── Collisions ───────────────────────────────────────────────────────────────

def count_pair_steps(logs: Sequence[EpisodeLog], threshold: float) -> tuple[int, int]:
    """(violating pair-steps, total pair-steps) over all logs."""
    violations = 0
    total = 0
    for log in logs:
        for rec in log.steps:
            n = rec.n
            if n < 2:
                continue
            dist = pairwise_distances(rec.followers)
            upper = np.triu_indices(n, k=1)
            violations += int(np.count_nonzero(dist[upper] < threshold))
            total += n * (n - 1) // 2
    return violations, total


def collision_rate(logs: Sequence[EpisodeLog], threshold: float) -> float:
    """Percentage of pair-steps with separation below `threshold`; 0 with no pairs."""
    violations, total = count_pair_steps(logs, threshold)
    return 100.0 * violations / total if total else 0.0


def min_pairwise_distance(states: Sequence[UAVState]) -> float:
    """Smallest follower–follower separation; NaN with fewer than two followers."""
    if len(states) < 2:
        return float("nan")
    dist = pairwise_distances(states)
    return float(dist[np.triu_indices(len(states), k=1)].min())
