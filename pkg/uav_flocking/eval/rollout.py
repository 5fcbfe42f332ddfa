"""
rollout.py — Frozen-policy episodes, optionally with followers joining mid-flight.

Exploration is off (σ = 0). Passing `networks=None` flies the random-policy
baseline instead: each follower draws uniform actions from the action space.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from uav_flocking.env.environment import reset_episode
from uav_flocking.env.state import Action
from uav_flocking.eval.metrics import EpisodeLog, StepRecord
from uav_flocking.nn.networks import ACTION_SCALE, PolicyNetworks
from uav_flocking.run_config import RunConfig

logger = logging.getLogger(__name__)

RANDOM_POLICY_ID = "random"


@dataclass(frozen=True)
class Scenario:
    """
    n_initial followers for `steps` control steps; joins[t] followers are added
    at the start of step t (before anyone acts), t in [0, steps).
    """

    n_initial: int | None
    steps: int
    joins: dict[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError("steps must be ≥ 0")
        if self.n_initial is not None and self.n_initial < 1:
            raise ValueError("n_initial must be ≥ 1")
        for t, count in self.joins.items():
            if not 0 <= t < self.steps or count < 1:
                raise ValueError(f"invalid join {count} at step {t}")


def squad_growth_scenario(n_initial: int = 4, n_join: int = 4, join_step: int = 100, steps: int = 200) -> Scenario:
    """Squad of n_initial that grows by n_join followers at join_step."""
    return Scenario(n_initial=n_initial, steps=steps, joins={join_step: n_join})


def rollout(
    networks: PolicyNetworks | None,
    cfg: RunConfig,
    scenario: Scenario,
    seed: int,
    episode: int = 0,
    policy_id: str | None = None,
) -> EpisodeLog:
    """
    Fly one deterministic episode and record post-step states and rewards.

    Identical (networks, cfg, scenario, seed) give identical logs.
    """
    # Per-episode stream from (seed, episode): independent of worker scheduling
    world_seq, policy_seq = np.random.SeedSequence([seed, episode]).spawn(2)
    world = reset_episode(
        cfg,
        world_seq,
        n=scenario.n_initial,
        disturbance_enabled=cfg.disturbance.apply_in_evaluation,
    )
    if policy_id is None:
        policy_id = RANDOM_POLICY_ID if networks is None else cfg.embedding.variant.value
    log = EpisodeLog(
        episode=episode,
        seed=seed,
        n_initial=world.n,
        policy_id=policy_id,
    )
    random_rng = np.random.default_rng(policy_seq)

    t0 = time.perf_counter()
    for t in range(scenario.steps):
        if t in scenario.joins:
            world.add_follower(scenario.joins[t])
        observations = world.observations()
        if networks is None:
            raw = random_rng.uniform(-ACTION_SCALE, ACTION_SCALE, size=(world.n, 2))
        else:
            raw = networks.act(observations)
        rewards = world.step([Action.from_array(a) for a in raw])
        log.steps.append(StepRecord(
            t=world.t,
            leader=world.leader,
            follower_ids=list(world.follower_ids),
            followers=list(world.followers),
            rewards=rewards,
        ))

    logger.debug(
        "Rollout done — episode=%d, policy=%s, n=%d→%d, steps=%d, %.3fs",
        episode, policy_id, log.n_initial, world.n, scenario.steps, time.perf_counter() - t0,
    )
    return log
