"""
environment.py — Flocking MDP: state encodings, reward, episode lifecycle.

From the perspective of follower i the flock splits into the ego-follower, the
leader and the other followers. `FlockWorld` holds the simulation state of one
episode; reads (`observe`, `observations`) are pure, while `step` and
`add_follower` are the only writers.

Reward for the ego-follower:

    ρ     = ‖(s1, s2)‖
    d_e   = max{m(d1 − ρ), 0, ρ − d2}
    r_l   = −max{d_e, d1·|s3| / (π(1 + ω·d_e))}
    r_c^j = −max{m(d1 − ρ_j), 0}
    r     = r_l + Σ_j r_c^j
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from uav_flocking.dynamics.kinematics import DisturbanceModel, UAVState, step as integrate, wrap_angle
from uav_flocking.env.actions import apply_roll_action, apply_velocity_action
from uav_flocking.env.leader import LeaderPolicy, build_leader_policy, leader_step
from uav_flocking.env.state import Action, JointStateE, JointStateO, Observation
from uav_flocking.errors import SpawnError
from uav_flocking.run_config import RewardConfig, RunConfig

logger = logging.getLogger(__name__)


# ─── State encodings ──────────────────────────────────────────────────────────

def encode_joint_e(
    ego: UAVState,
    leader: UAVState,
    leader_setpoints: tuple[float, float],
) -> JointStateE:
    """Ego-follower / leader joint state, relative position in the leader frame."""
    dx = ego.x - leader.x
    dy = ego.y - leader.y
    c, s = math.cos(leader.psi), math.sin(leader.psi)
    phi_d_l, v_d_l = leader_setpoints
    return JointStateE(np.array([
        c * dx + s * dy,
        -s * dx + c * dy,
        wrap_angle(ego.psi - leader.psi),
        ego.phi,
        leader.phi,
        phi_d_l,
        ego.v,
        leader.v,
        v_d_l,
    ], dtype=np.float64))


def encode_joint_o(ego: UAVState, others: Sequence[UAVState]) -> JointStateO:
    """
    Ego-follower / other-followers joint state.

    One row per entry of `others`, in the given (stable index) order; no
    distance sorting.
    """
    c, s = math.cos(ego.psi), math.sin(ego.psi)
    rows = np.empty((len(others), 5), dtype=np.float64)
    for j, other in enumerate(others):
        dx = other.x - ego.x
        dy = other.y - ego.y
        rows[j] = (
            c * dx + s * dy,
            -s * dx + c * dy,
            wrap_angle(other.psi - ego.psi),
            other.phi,
            other.v,
        )
    return JointStateO(rows)


# ─── Reward ───────────────────────────────────────────────────────────────────

def flocking_reward(se: JointStateE, cfg: RewardConfig) -> float:
    rho = se.rho
    d_e = max(cfg.m * (cfg.d1 - rho), 0.0, rho - cfg.d2)
    heading_term = cfg.d1 * abs(se.heading_difference) / (math.pi * (1.0 + cfg.omega * d_e))
    return -max(d_e, heading_term)


def collision_penalty(row: np.ndarray, cfg: RewardConfig) -> float:
    rho_j = math.hypot(row[0], row[1])
    return -max(cfg.m * (cfg.d1 - rho_j), 0.0)


def total_reward(se: JointStateE, so: JointStateO, cfg: RewardConfig) -> float:
    reward = flocking_reward(se, cfg)
    for row in so.rows:
        reward += collision_penalty(row, cfg)
    return reward


# ─── Collisions ───────────────────────────────────────────────────────────────

def pairwise_distances(states: Sequence[UAVState]) -> np.ndarray:
    xy = np.array([(s.x, s.y) for s in states], dtype=np.float64).reshape(-1, 2)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def detect_collisions(followers: Sequence[UAVState], threshold: float) -> set[tuple[int, int]]:
    """All unordered index pairs (i < j) closer than `threshold`."""
    if len(followers) < 2:
        return set()
    dist = pairwise_distances(followers)
    i_idx, j_idx = np.nonzero(np.triu(dist < threshold, k=1))
    return {(int(i), int(j)) for i, j in zip(i_idx, j_idx)}


# ─── World ────────────────────────────────────────────────────────────────────

@dataclass
class FlockWorld:
    """Leader plus a variable number of followers for one episode."""

    cfg: RunConfig
    leader: UAVState
    leader_setpoints: tuple[float, float]
    followers: list[UAVState]
    follower_ids: list[int]
    policy: LeaderPolicy
    rng: np.random.Generator
    disturbance: DisturbanceModel
    t: int = 0
    follower_setpoints: list[tuple[float, float]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.followers)

    def observe(self, i: int) -> Observation:
        ego = self.followers[i]
        others = self.followers[:i] + self.followers[i + 1:]
        return (
            encode_joint_e(ego, self.leader, self.leader_setpoints),
            encode_joint_o(ego, others),
        )

    def observations(self) -> list[Observation]:
        return [self.observe(i) for i in range(self.n)]

    def rewards(self) -> np.ndarray:
        return np.array(
            [total_reward(se, so, self.cfg.reward) for se, so in self.observations()],
            dtype=np.float64,
        )

    def step(self, actions: Sequence[Action]) -> np.ndarray:
        """
        Execute one follower action each, advance every UAV by one control period,
        draw the leader's next setpoints, and return the per-follower rewards.
        """
        if len(actions) != self.n:
            raise ValueError(f"expected {self.n} actions, got {len(actions)}")
        k = self.cfg.kinematics

        setpoints = [
            (
                apply_roll_action(f.phi, a.a_r, k.r_bd),
                apply_velocity_action(f.v, a.a_v, k.v_min, k.v_max),
            )
            for f, a in zip(self.followers, actions)
        ]
        phi_d_l, v_d_l = self.leader_setpoints
        self.leader = integrate(self.leader, phi_d_l, v_d_l, self.disturbance, k)
        self.followers = [
            integrate(f, phi_d, v_d, self.disturbance, k)
            for f, (phi_d, v_d) in zip(self.followers, setpoints)
        ]
        self.follower_setpoints = setpoints
        self.t += 1
        self.leader_setpoints = leader_step(self.policy, self.leader, self.rng)
        return self.rewards()

    def add_follower(self, count: int = 1) -> list[int]:
        """Spawn `count` followers on the outer annulus edge; returns their ids."""
        _, outer = self.cfg.spawn_annulus
        new_ids = []
        for _ in range(count):
            state = _sample_follower(
                self.cfg, self.rng, self.leader, self.followers, outer, outer
            )
            self.followers.append(state)
            new_id = max(self.follower_ids, default=0) + 1
            self.follower_ids.append(new_id)
            new_ids.append(new_id)
        logger.debug("Followers joined at t=%d — ids=%s, n=%d", self.t, new_ids, self.n)
        return new_ids

    def collisions(self, threshold: float | None = None) -> set[tuple[int, int]]:
        if threshold is None:
            threshold = self.cfg.reward.collision_threshold
        return detect_collisions(self.followers, threshold)


# ─── Episode reset ────────────────────────────────────────────────────────────

def _sample_follower(
    cfg: RunConfig,
    rng: np.random.Generator,
    leader: UAVState,
    existing: Sequence[UAVState],
    inner: float,
    outer: float,
) -> UAVState:
    k = cfg.kinematics
    spacing = cfg.min_spawn_spacing
    for _ in range(cfg.flock.spawn_max_tries):
        # Uniform over the annulus area
        radius = math.sqrt(rng.uniform(inner * inner, outer * outer))
        bearing = rng.uniform(-math.pi, math.pi)
        x = leader.x + radius * math.cos(bearing)
        y = leader.y + radius * math.sin(bearing)
        if all(math.hypot(x - o.x, y - o.y) >= spacing for o in existing):
            return UAVState(
                x=x,
                y=y,
                psi=wrap_angle(rng.uniform(-math.pi, math.pi)),
                phi=0.0,
                v=float(rng.uniform(k.v_min, k.v_max)),
            )
    raise SpawnError(
        f"could not place follower #{len(existing) + 1} with spacing ≥ {spacing} m "
        f"in annulus [{inner}, {outer}] after {cfg.flock.spawn_max_tries} tries"
    )


def reset_episode(
    cfg: RunConfig,
    seed: int | np.random.SeedSequence,
    n: int | None = None,
    disturbance_enabled: bool = True,
) -> FlockWorld:
    """
    Leader at the origin plus n followers (n ~ U{n_min..n_max} unless given).

    Followers are spread uniformly over the spawn annulus around the leader with
    pairwise spacing ≥ min_spawn_spacing, random headings, v ~ U[v_min, v_max], φ = 0.

    Raises:
        SpawnError: a follower could not be placed within spawn_max_tries draws.
    """
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    env_seq, disturbance_seq = seq.spawn(2)
    rng = np.random.default_rng(env_seq)
    k = cfg.kinematics

    if n is None:
        n = int(rng.integers(cfg.flock.n_min, cfg.flock.n_max + 1))

    leader = UAVState(
        x=0.0,
        y=0.0,
        psi=wrap_angle(rng.uniform(-math.pi, math.pi)),
        phi=0.0,
        v=float(rng.uniform(k.v_min, k.v_max)),
    )
    inner, outer = cfg.spawn_annulus
    followers: list[UAVState] = []
    for _ in range(n):
        followers.append(_sample_follower(cfg, rng, leader, followers, inner, outer))

    policy = build_leader_policy(cfg.flock, k)
    disturbance = DisturbanceModel.from_config(
        cfg.disturbance, rng_seed=disturbance_seq, enabled=disturbance_enabled
    )
    world = FlockWorld(
        cfg=cfg,
        leader=leader,
        leader_setpoints=(0.0, leader.v),
        followers=followers,
        follower_ids=list(range(1, n + 1)),
        policy=policy,
        rng=rng,
        disturbance=disturbance,
    )
    world.leader_setpoints = leader_step(policy, leader, rng)
    return world
