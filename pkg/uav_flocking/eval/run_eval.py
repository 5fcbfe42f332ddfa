"""
run_eval.py — Frozen-policy evaluation and the SEMP / CNNMP comparison harness.

Runs a fixed number of episodes per squad size, computes G_Avg and the collision
rate per episode, prints a summary table, and writes metrics CSVs.

Usage:
    python -m uav_flocking.eval.run_eval --checkpoint runs/default/checkpoints/final.ckpt
    python -m uav_flocking.eval.run_eval --checkpoint final.ckpt --n 4 --episodes 20
"""

import argparse
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from uav_flocking.errors import ConfigError
from uav_flocking.eval.metrics import EpisodeLog, average_reward, collision_rate
from uav_flocking.eval.rollout import Scenario, rollout
from uav_flocking.nn.networks import PolicyNetworks
from uav_flocking.run_config import EmbeddingVariant, RunConfig, apply_overrides
from uav_flocking.training.trainer import train

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ["variant", "n", "seed", "episode", "G_Avg", "collision_rate"]
COMPARISON_COLUMNS = ["variant", "n", "reward_avg", "reward_var", "collision_avg", "collision_var"]
COMPARISON_METADATA = {
    "collision_rate_denominator": "pair-steps: unordered follower pairs x control steps",
    "collision_rate_unit": "percent",
    "variance": "population (ddof=0)",
    "aggregation_unit": "episode",
}
MIN_COMPARISON_SEEDS = 3


# ─── Evaluation ───────────────────────────────────────────────────────────────

def run_episodes(
    networks: PolicyNetworks | None,
    cfg: RunConfig,
    scenario: Scenario,
    episodes: int,
    seed: int,
    workers: int = 1,
    policy_id: str | None = None,
) -> list[EpisodeLog]:
    """Episodes 0..episodes−1; results are identical for any worker count."""
    def _one(episode: int) -> EpisodeLog:
        return rollout(networks, cfg, scenario, seed, episode=episode, policy_id=policy_id)

    if workers > 1 and episodes > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_one, range(episodes)))
    return [_one(e) for e in range(episodes)]


def episode_metrics(logs: Sequence[EpisodeLog], variant: str, n: int, threshold: float) -> pd.DataFrame:
    """One metrics row per episode: variant, n, seed, episode, G_Avg, collision_rate."""
    rows = [
        {
            "variant": variant,
            "n": n,
            "seed": log.seed,
            "episode": log.episode,
            "G_Avg": average_reward([log], n, 1, log.num_steps) if log.num_steps else float("nan"),
            "collision_rate": collision_rate([log], threshold),
        }
        for log in logs
    ]
    return pd.DataFrame(rows, columns=METRICS_COLUMNS)


def evaluate_policy(
    networks: PolicyNetworks | None,
    cfg: RunConfig,
    n: int,
    episodes: int | None = None,
    steps: int | None = None,
    seed: int | None = None,
    variant: str | None = None,
) -> tuple[pd.DataFrame, dict[str, float]]:
    """
    Evaluate a frozen policy with a fixed squad of n followers.

    Returns:
        (per-episode metrics frame, summary dict with G_Avg, collision_rate, mean_rho)
    """
    ecfg = cfg.evaluation
    episodes = episodes if episodes is not None else ecfg.episodes
    steps = steps if steps is not None else ecfg.steps
    seed = seed if seed is not None else cfg.seed
    if variant is None:
        variant = "random" if networks is None else cfg.embedding.variant.value

    t0 = time.perf_counter()
    logs = run_episodes(networks, cfg, Scenario(n_initial=n, steps=steps), episodes, seed, ecfg.workers, variant)
    metrics = episode_metrics(logs, variant, n, ecfg.collision_threshold)
    summary = {
        "variant": variant,
        "n": n,
        "episodes": episodes,
        "G_Avg": average_reward(logs, n, episodes, steps) if steps else float("nan"),
        "collision_rate": collision_rate(logs, ecfg.collision_threshold),
        "mean_rho": float(np.nanmean([log.mean_leader_distance() for log in logs])) if steps else float("nan"),
    }
    logger.info(
        "Evaluation done — variant=%s, n=%d, episodes=%d, G_Avg=%.3f, collision=%.3f%%, %.1fs",
        variant, n, episodes, summary["G_Avg"], summary["collision_rate"], time.perf_counter() - t0,
    )
    return metrics, summary


# ─── Comparison ───────────────────────────────────────────────────────────────

def comparison_table(per_episode: pd.DataFrame) -> pd.DataFrame:
    """Mean and population variance of per-episode G_Avg / collision rate per (variant, n)."""
    if per_episode.empty:
        return pd.DataFrame(columns=COMPARISON_COLUMNS)
    grouped = per_episode.groupby(["variant", "n"], sort=True)
    table = grouped.agg(
        reward_avg=("G_Avg", "mean"),
        reward_var=("G_Avg", lambda s: float(np.var(s.to_numpy(), ddof=0))),
        collision_avg=("collision_rate", "mean"),
        collision_var=("collision_rate", lambda s: float(np.var(s.to_numpy(), ddof=0))),
    ).reset_index()
    return table[COMPARISON_COLUMNS]


def compare_embeddings(
    cfg: RunConfig,
    seeds: Sequence[int],
    variants: Sequence[EmbeddingVariant] = (EmbeddingVariant.SEMP, EmbeddingVariant.CNNMP),
    output_dir: str | Path | None = None,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """
    Train every (variant, seed), evaluate each on every configured n, and
    aggregate per (variant, n).

    Returns:
        (comparison table, per-episode metrics across all seeds)
    """
    if len(seeds) < MIN_COMPARISON_SEEDS:
        raise ConfigError(f"compare needs at least {MIN_COMPARISON_SEEDS} seeds, got {len(seeds)}")
    frames = []
    for variant in variants:
        for seed in seeds:
            run_cfg = apply_overrides(cfg, variant=variant.value, seed=int(seed))
            run_dir = Path(output_dir) / f"{variant.value}_seed{seed}" if output_dir else None
            logger.info("Comparison run — variant=%s, seed=%d", variant.value, seed)
            result = train(run_cfg, run_dir)
            for n in run_cfg.evaluation.n_values:
                metrics, _ = evaluate_policy(result.networks, run_cfg, n, seed=int(seed))
                frames.append(metrics)
    per_episode = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=METRICS_COLUMNS)
    return comparison_table(per_episode), per_episode


def write_comparison(table: pd.DataFrame, path: str | Path, seeds: Sequence[int]) -> Path:
    """Comparison CSV plus a `<name>.meta.json` sidecar describing the statistics."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False)
    meta = {**COMPARISON_METADATA, "seeds": [int(s) for s in seeds]}
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("Comparison saved to %s", path)
    return path


# ─── Summary ──────────────────────────────────────────────────────────────────

def print_summary(summaries: list[dict], title: str = "FLOCKING EVALUATION RESULTS") -> None:
    """Print a formatted summary table to stdout."""
    if not summaries:
        print("\nNo results to summarise.")
        return
    from tabulate import tabulate
    rows = [
        [
            s["variant"],
            s["n"],
            s.get("episodes", ""),
            f"{s['G_Avg']:.3f}",
            f"{s['collision_rate']:.3f}",
            f"{s.get('mean_rho', float('nan')):.2f}",
        ]
        for s in summaries
    ]
    headers = ["Policy", "n", "Episodes", "G_Avg", "Collision %", "Mean ρ (m)"]
    print("\n" + "=" * 80)
    print(title)
    print("=" * 80)
    print(tabulate(rows, headers=headers, tablefmt="rounded_outline"))
    print("=" * 80)


def print_comparison(table: pd.DataFrame) -> None:
    from tabulate import tabulate
    print("\n" + "=" * 80)
    print("EMBEDDING COMPARISON (per-episode mean / population variance)")
    print("=" * 80)
    print(tabulate(table, headers="keys", tablefmt="rounded_outline", showindex=False, floatfmt=".3f"))
    print("=" * 80)


if __name__ == "__main__":
    from uav_flocking.logging_config import setup_logging
    setup_logging("INFO")

    from uav_flocking.training.checkpoint import load_checkpoint, restore_networks

    parser = argparse.ArgumentParser(description="Evaluate a trained flocking policy")
    parser.add_argument("--checkpoint", type=str, required=True, help="Checkpoint file")
    parser.add_argument("--n", type=int, action="append", default=None,
                        help="Squad size (repeatable; default: configured n values)")
    parser.add_argument("--episodes", type=int, default=None, help="Episodes per squad size")
    parser.add_argument("--steps", type=int, default=None, help="Steps per episode")
    parser.add_argument("--seed", type=int, default=None, help="Evaluation seed")
    args = parser.parse_args()

    ckpt = load_checkpoint(args.checkpoint)
    cfg = ckpt.run_config()
    networks = restore_networks(ckpt, cfg)
    summaries = []
    for n in args.n or cfg.evaluation.n_values:
        _, summary = evaluate_policy(networks, cfg, n, args.episodes, args.steps, args.seed)
        summaries.append(summary)
    print_summary(summaries)
