"""
flock_service.py — Orchestration layer between the CLI and the library.

Each public method:
  1. Runs one command (train / eval / rollout / plot / compare)
  2. Writes its artefacts into the run's output directory
  3. Appends a run record to logs/runs.jsonl, including failures
  4. Returns a plain result dict for the CLI to print
"""

import json
import logging
import time
from pathlib import Path
from typing import Any, Callable, Sequence

import pandas as pd

from uav_flocking import config
from uav_flocking.eval.metrics import collision_rate, mean_reward
from uav_flocking.eval.rollout import Scenario, rollout
from uav_flocking.eval.run_eval import (
    METRICS_COLUMNS,
    compare_embeddings,
    evaluate_policy,
    write_comparison,
)
from uav_flocking.run_config import RunConfig, config_digest, save_run_config
from uav_flocking.tools.plot_tool import plot_comparison, plot_learning_curve, plot_trajectory
from uav_flocking.tools.trajectory_log import read_trajectory_csv, write_trajectory_csv
from uav_flocking.training.checkpoint import load_checkpoint, restore_networks
from uav_flocking.training.trainer import METRICS_COLUMNS as TRAIN_METRICS_COLUMNS, train

logger = logging.getLogger(__name__)


class FlockService:
    """Entry-point facade for training and evaluating flocking policies."""

    def __init__(self, records_file: str | Path | None = None) -> None:
        self.records_file = Path(records_file) if records_file else config.RUN_RECORDS_FILE
        logger.info("FlockService initialised")

    # ── Commands ──────────────────────────────────────────────────────────────

    def train(self, cfg: RunConfig) -> dict[str, Any]:
        """Train, then write resolved_config.json, train_metrics.csv and learning_curve.svg."""
        def _run() -> dict[str, Any]:
            out_dir = Path(cfg.output_dir)
            save_run_config(cfg, out_dir / "resolved_config.json")
            result = train(cfg, out_dir)
            metrics_path = out_dir / "train_metrics.csv"
            result.metrics.to_csv(metrics_path, index=False)
            curve = plot_learning_curve(result.metrics, out_dir / "learning_curve.svg")
            tail = result.metrics["G_Avg"].tail(cfg.evaluation.train_episodes)
            return {
                "output_dir": str(out_dir),
                "episodes": len(result.metrics),
                "metrics_csv": str(metrics_path),
                "learning_curve": str(curve),
                "checkpoints": [str(p) for p in result.checkpoints],
                "final_G_Avg_rolling": float(tail.mean()) if len(tail) else float("nan"),
            }

        return self._execute("train", _run, config_digest=config_digest(cfg))

    def evaluate(
        self,
        checkpoint: str | Path,
        configure: Callable[[RunConfig], RunConfig] | None = None,
        n_values: Sequence[int] | None = None,
        episodes: int | None = None,
        steps: int | None = None,
        out_csv: str | Path | None = None,
    ) -> dict[str, Any]:
        """
        Frozen-policy evaluation; one metrics row per (n, episode).

        `configure` maps the checkpoint's own run config to the one used
        (the CLI applies --config and its overrides there).
        """
        def _run() -> dict[str, Any]:
            ckpt = load_checkpoint(checkpoint)
            run_cfg = ckpt.run_config()
            if configure is not None:
                run_cfg = configure(run_cfg)
            networks = restore_networks(ckpt, run_cfg)
            frames, summaries = [], []
            for n in n_values or run_cfg.evaluation.n_values:
                metrics, summary = evaluate_policy(networks, run_cfg, n, episodes, steps)
                frames.append(metrics)
                summaries.append(summary)
            table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=METRICS_COLUMNS)
            path = Path(out_csv) if out_csv else Path(checkpoint).resolve().parent.parent / "eval_metrics.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            table.to_csv(path, index=False)
            return {"metrics_csv": str(path), "rows": len(table), "seed": run_cfg.seed, "summaries": summaries}

        return self._execute("eval", _run, checkpoint=str(checkpoint))

    def rollout(
        self,
        checkpoint: str | Path | None,
        scenario: Scenario,
        configure: Callable[[RunConfig], RunConfig] | None = None,
        out_csv: str | Path | None = None,
    ) -> dict[str, Any]:
        """
        One frozen-policy episode written as a trajectory CSV (random policy without checkpoint).

        The episode is seeded from the resolved config; the CSV defaults to
        `<output_dir>/rollout.csv`.
        """
        def _run() -> dict[str, Any]:
            networks = None
            ckpt = load_checkpoint(checkpoint) if checkpoint is not None else None
            run_cfg = ckpt.run_config() if ckpt is not None else RunConfig()
            if configure is not None:
                run_cfg = configure(run_cfg)
            if ckpt is not None:
                networks = restore_networks(ckpt, run_cfg)
            log = rollout(networks, run_cfg, scenario, run_cfg.seed)
            path = write_trajectory_csv([log], Path(out_csv) if out_csv else Path(run_cfg.output_dir) / "rollout.csv")
            has_samples = log.reward_samples().size > 0
            return {
                "trajectory_csv": str(path),
                "seed": run_cfg.seed,
                "steps": log.num_steps,
                "n_initial": log.n_initial,
                "n_final": log.steps[-1].n if log.steps else log.n_initial,
                "mean_reward": mean_reward([log]) if has_samples else float("nan"),
                "collision_rate": collision_rate([log], run_cfg.evaluation.collision_threshold),
                "mean_rho": log.mean_leader_distance(),
            }

        return self._execute("rollout", _run, checkpoint=str(checkpoint) if checkpoint else None)

    def plot(self, csv_path: str | Path, out_svg: str | Path | None = None, cfg: RunConfig | None = None) -> dict[str, Any]:
        """SVG from a trajectory CSV, or a learning curve from a train_metrics.csv."""
        def _run() -> dict[str, Any]:
            src = Path(csv_path)
            out = Path(out_svg) if out_svg else src.with_suffix(".svg")
            header = _read_header(src)
            if header == TRAIN_METRICS_COLUMNS:
                path = plot_learning_curve(pd.read_csv(src), out)
                return {"svg": str(path), "kind": "learning_curve"}
            run_cfg = cfg if cfg is not None else RunConfig()
            df = read_trajectory_csv(src)
            path = plot_trajectory(
                df, out,
                d1=run_cfg.reward.d1,
                d2=run_cfg.reward.d2,
                threshold=run_cfg.evaluation.collision_threshold,
            )
            return {"svg": str(path), "kind": "trajectory", "rows": len(df)}

        return self._execute("plot", _run, source=str(csv_path))

    def compare(self, cfg: RunConfig, seeds: Sequence[int]) -> dict[str, Any]:
        """Train and evaluate both embedding variants; write comparison CSV, metadata and figure."""
        def _run() -> dict[str, Any]:
            out_dir = Path(cfg.output_dir)
            table, per_episode = compare_embeddings(cfg, seeds, output_dir=out_dir)
            per_episode_path = out_dir / "comparison_episodes.csv"
            per_episode_path.parent.mkdir(parents=True, exist_ok=True)
            per_episode.to_csv(per_episode_path, index=False)
            table_path = write_comparison(table, out_dir / "comparison.csv", seeds)
            figure = plot_comparison(per_episode, out_dir / "comparison.svg")
            return {
                "comparison_csv": str(table_path),
                "episodes_csv": str(per_episode_path),
                "figure": str(figure),
                "table": table.to_dict(orient="records"),
            }

        return self._execute("compare", _run, seeds=[int(s) for s in seeds])

    # ── Plumbing ──────────────────────────────────────────────────────────────

    def _execute(self, command: str, fn: Callable[[], dict[str, Any]], **context: Any) -> dict[str, Any]:
        logger.info("FlockService.%s() — %s", command, context)
        t0 = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            elapsed = time.perf_counter() - t0
            logger.error("FlockService.%s() failed after %.3fs: %s", command, elapsed, exc, exc_info=True)
            self._save_record(command, context, elapsed, error=str(exc))
            raise
        elapsed = time.perf_counter() - t0
        result["latency_s"] = round(elapsed, 3)
        self._save_record(command, context, elapsed)
        logger.info("FlockService.%s() complete — total=%.3fs", command, elapsed)
        return result

    def _save_record(self, command: str, context: dict[str, Any], elapsed: float, error: str | None = None) -> None:
        """Append a run record to logs/runs.jsonl."""
        record = {
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "command": command,
            "latency_s": round(elapsed, 3),
            "error": error,
            **context,
        }
        try:
            self.records_file.parent.mkdir(parents=True, exist_ok=True)
            with open(self.records_file, "a", encoding="utf-8") as f:
                f.write(json.dumps(record, default=str) + "\n")
            logger.debug("Run record saved to %s", self.records_file)
        except Exception as exc:
            logger.warning("Could not save run record: %s", exc)


def _read_header(path: Path) -> list[str]:
    if not path.is_file():
        return []
    with open(path, encoding="utf-8") as f:
        return f.readline().strip().split(",")
