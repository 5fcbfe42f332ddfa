"""
trainer.py — Parameter-shared continuous actor-critic with experience replay.

Per episode:
  1. Reset the world with n ~ U{n_min..n_max} followers
  2. Per time step:
       - every follower acts through the one shared actor (single batched pass)
         plus Gaussian exploration noise
       - all n transitions go into the shared replay memory
       - once the memory holds `warmup` transitions, sample one batch and
           · compute δ = r + γV(s′) − V(s) with the pre-update critic
           · take one Adam step on the critic loss mean(δ²)
           · regress the actor toward the executed actions of the tuples with δ > 0
  3. Emit one metrics row; checkpoint every `checkpoint_every` episodes

No target networks are used.
"""

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from uav_flocking.env.environment import reset_episode
from uav_flocking.env.state import Action, Observation
from uav_flocking.errors import NonFiniteError
from uav_flocking.nn.core import Adam
from uav_flocking.nn.networks import ACTION_SCALE, PolicyNetworks, actions_from_output, build_policy_networks
from uav_flocking.run_config import RunConfig, TrainerConfig
from uav_flocking.training.checkpoint import save_checkpoint
from uav_flocking.training.replay import Experience, ReplayMemory

logger = logging.getLogger(__name__)

METRICS_COLUMNS = [
    "episode", "n", "G_Avg", "G_Avg_rolling", "collision_rate",
    "critic_loss", "actor_loss", "actor_updates", "sigma", "replay_size",
]


# ─── Exploration ──────────────────────────────────────────────────────────────

def exploration_sigma(episode: int, cfg: TrainerConfig) -> float:
    """σ(e) = σ0·(σ1/σ0)^(e/E) for e < E, then σ1."""
    if cfg.sigma_start == 0.0:
        return 0.0
    frac = min(max(episode, 0), cfg.sigma_decay_episodes) / cfg.sigma_decay_episodes
    if frac >= 1.0:
        return cfg.sigma_end
    return cfg.sigma_start * (cfg.sigma_end / cfg.sigma_start) ** frac


def explore_batch(actions: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add N(0, (σ·half_range)²) noise per component and clamp to the action bounds."""
    actions = np.asarray(actions, dtype=np.float64)
    if sigma == 0.0:
        return actions.copy()
    noisy = actions + rng.normal(0.0, 1.0, size=actions.shape) * (sigma * ACTION_SCALE)
    return np.clip(noisy, -ACTION_SCALE, ACTION_SCALE)


def explore(action: Action, sigma: float, rng: np.random.Generator) -> Action:
    return Action.from_array(explore_batch(action.as_array()[None, :], sigma, rng)[0])


def select_actions(
    observations: Sequence[Observation],
    networks: PolicyNetworks,
    sigma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Actions (n, 2) for all followers from one forward pass of the shared actor.

    Row i depends only on observations[i] and the actor parameters.
    """
    return explore_batch(networks.act(observations), sigma, rng)


# ─── TD error and updates ─────────────────────────────────────────────────────

def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"non-finite {what}")


def td_errors(batch: Sequence[Experience], networks: PolicyNetworks, gamma: float) -> np.ndarray:
    """δ_k = r_k + γ·V(s′_k) − V(s_k) for every tuple of the batch."""
    v_next = networks.value([exp.s_next for exp in batch])
    v_s = networks.value([exp.s for exp in batch])
    rewards = np.array([exp.r for exp in batch], dtype=np.float64)
    deltas = rewards + gamma * v_next - v_s
    _check_finite(deltas, "TD error")
    return deltas


def td_error(exp: Experience, networks: PolicyNetworks, gamma: float) -> float:
    return float(td_errors([exp], networks, gamma)[0])


def positive_td_indices(deltas: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.asarray(deltas) > 0.0)


def positive_td_filter(batch: Sequence[Experience], deltas: np.ndarray) -> list[Experience]:
    """Sub-batch D′ of tuples with δ strictly positive, batch order kept."""
    return [batch[int(i)] for i in positive_td_indices(deltas)]


def critic_update(
    batch: Sequence[Experience],
    networks: PolicyNetworks,
    optimizer: Adam,
    gamma: float,
) -> tuple[float, np.ndarray]:
    """
    One Adam step on mean(δ²); targets r + γV(s′) are held constant.

    Returns:
        (pre-step loss, δ computed with the pre-step critic)
    """
    critic = networks.critic
    v_next = networks.value([exp.s_next for exp in batch])
    # Forward on s last so the layer caches belong to V(s)
    v_s = critic.forward(networks.pack([exp.s for exp in batch]))[:, 0]
    rewards = np.array([exp.r for exp in batch], dtype=np.float64)
    deltas = rewards + gamma * v_next - v_s
    loss = float(np.mean(deltas * deltas))
    if not math.isfinite(loss):
        raise NonFiniteError("non-finite critic loss")

    critic.zero_grad()
    critic.backward((-2.0 * deltas / len(batch))[:, None])
    optimizer.step(critic.named_parameters(), critic.named_grads())
    return loss, deltas


def actor_update(
    positive: Sequence[Experience],
    networks: PolicyNetworks,
    optimizer: Adam,
) -> float | None:
    """
    One Adam step on (1/|D′|)·Σ‖a − Act(s)‖² in action units.

    Returns the pre-step loss, or None when D′ is empty (no update).
    """
    if not positive:
        return None
    actor = networks.actor
    out = actor.forward(networks.pack([exp.s for exp in positive]))
    predicted = actions_from_output(out)
    targets = np.stack([exp.a.as_array() for exp in positive])
    diff = predicted - targets
    loss = float(np.mean(np.sum(diff * diff, axis=1)))
    if not math.isfinite(loss):
        raise NonFiniteError("non-finite actor loss")

    actor.zero_grad()
    actor.backward(2.0 * diff / len(positive) * ACTION_SCALE)
    optimizer.step(actor.named_parameters(), actor.named_grads())
    return loss


# ─── Training loop ────────────────────────────────────────────────────────────

@dataclass
class TrainResult:
    networks: PolicyNetworks
    actor_opt: Adam
    critic_opt: Adam
    metrics: pd.DataFrame
    checkpoints: list[Path] = field(default_factory=list)


class Trainer:
    """Runs the training loop for one RunConfig; all randomness derives from cfg.seed."""

    def __init__(self, cfg: RunConfig, output_dir: str | Path | None = None) -> None:
        self.cfg = cfg
        self.output_dir = Path(output_dir) if output_dir is not None else None
        init_seq, env_seq, explore_seq, replay_seq = np.random.SeedSequence(cfg.seed).spawn(4)
        self.env_seq = env_seq
        self.explore_rng = np.random.default_rng(explore_seq)
        self.replay_rng = np.random.default_rng(replay_seq)
        self.networks = build_policy_networks(cfg, np.random.default_rng(init_seq))
        self.actor_opt = Adam(lr=cfg.trainer.lr_actor)
        self.critic_opt = Adam(lr=cfg.trainer.lr_critic)
        self.replay = ReplayMemory(cfg.trainer.replay_capacity)
        self.episode = 0
        self.checkpoints: list[Path] = []
        self._window: deque[float] = deque(maxlen=cfg.evaluation.train_episodes)

    # ── Episode ───────────────────────────────────────────────────────────────

    def run_episode(self) -> dict[str, float]:
        tcfg = self.cfg.trainer
        sigma = exploration_sigma(self.episode, tcfg)
        world = reset_episode(
            self.cfg,
            self.env_seq.spawn(1)[0],
            disturbance_enabled=self.cfg.disturbance.apply_in_training,
        )
        n = world.n
        threshold = self.cfg.evaluation.collision_threshold
        pairs_per_step = n * (n - 1) // 2

        reward_sum = 0.0
        collision_pairs = 0
        critic_losses: list[float] = []
        actor_losses: list[float] = []

        observations = world.observations()
        for _ in range(tcfg.steps_per_episode):
            raw = select_actions(observations, self.networks, sigma, self.explore_rng)
            actions = [Action.from_array(a) for a in raw]
            rewards = world.step(actions)
            next_observations = world.observations()
            self.replay.extend([
                Experience(s, a, float(r), s_next)
                for s, a, r, s_next in zip(observations, actions, rewards, next_observations)
            ])
            observations = next_observations
            reward_sum += float(rewards.sum())
            collision_pairs += len(world.collisions(threshold))

            if len(self.replay) >= tcfg.effective_warmup:
                c_loss, a_loss = self._update()
                critic_losses.append(c_loss)
                if a_loss is not None:
                    actor_losses.append(a_loss)

        g_avg = reward_sum / (n * tcfg.steps_per_episode)
        self._window.append(g_avg)
        total_pair_steps = pairs_per_step * tcfg.steps_per_episode
        return {
            "episode": self.episode,
            "n": n,
            "G_Avg": g_avg,
            "G_Avg_rolling": float(np.mean(self._window)),
            "collision_rate": 100.0 * collision_pairs / total_pair_steps if total_pair_steps else 0.0,
            "critic_loss": float(np.mean(critic_losses)) if critic_losses else float("nan"),
            "actor_loss": float(np.mean(actor_losses)) if actor_losses else float("nan"),
            "actor_updates": len(actor_losses),
            "sigma": sigma,
            "replay_size": len(self.replay),
        }

    def _update(self) -> tuple[float, float | None]:
        batch = self.replay.sample(self.cfg.trainer.batch_size, self.replay_rng)
        c_loss, deltas = critic_update(batch, self.networks, self.critic_opt, self.cfg.trainer.gamma)
        positive = positive_td_filter(batch, deltas)
        a_loss = actor_update(positive, self.networks, self.actor_opt)
        logger.debug(
            "Update — critic_loss=%.5f, |D'|=%d/%d, actor_loss=%s",
            c_loss, len(positive), len(batch), "skipped" if a_loss is None else f"{a_loss:.5f}",
        )
        return c_loss, a_loss

    # ── Checkpoints ───────────────────────────────────────────────────────────

    def _checkpoint(self, name: str) -> Path | None:
        if self.output_dir is None:
            return None
        path = save_checkpoint(
            self.output_dir / "checkpoints" / name,
            self.networks,
            self.cfg,
            self.episode,
            self.actor_opt,
            self.critic_opt,
        )
        self.checkpoints.append(path)
        return path

    # ── Loop ──────────────────────────────────────────────────────────────────

    def run(self) -> TrainResult:
        tcfg = self.cfg.trainer
        logger.info(
            "Training started — episodes=%d, steps=%d, batch=%d, variant=%s, seed=%d",
            tcfg.episodes, tcfg.steps_per_episode, tcfg.batch_size,
            self.cfg.embedding.variant.value, self.cfg.seed,
        )
        t0 = time.perf_counter()
        rows: list[dict[str, float]] = []

        while self.episode < tcfg.episodes:
            try:
                row = self.run_episode()
            except NonFiniteError:
                logger.error("Non-finite value at episode %d — writing diagnostic checkpoint", self.episode)
                self._checkpoint("diagnostic.ckpt")
                raise
            rows.append(row)
            self.episode += 1

            if self.episode % tcfg.log_every == 0 or self.episode == tcfg.episodes:
                logger.info(
                    "Episode %d/%d — n=%d, G_Avg=%.3f, rolling=%.3f, critic=%.4f, actor=%.4f, "
                    "sigma=%.4f, replay=%d",
                    self.episode, tcfg.episodes, row["n"], row["G_Avg"], row["G_Avg_rolling"],
                    row["critic_loss"], row["actor_loss"], row["sigma"], row["replay_size"],
                )
            if self.episode % tcfg.checkpoint_every == 0:
                self._checkpoint(f"episode_{self.episode:06d}.ckpt")

        self._checkpoint("final.ckpt")
        elapsed = time.perf_counter() - t0
        logger.info("Training complete — %d episodes in %.1fs", self.episode, elapsed)

        metrics = pd.DataFrame(rows, columns=METRICS_COLUMNS)
        return TrainResult(
            networks=self.networks,
            actor_opt=self.actor_opt,
            critic_opt=self.critic_opt,
            metrics=metrics,
            checkpoints=list(self.checkpoints),
        )


def train(cfg: RunConfig, output_dir: str | Path | None = None) -> TrainResult:
    """Run all configured episodes; checkpoints go under `output_dir/checkpoints`."""
    return Trainer(cfg, output_dir).run()
