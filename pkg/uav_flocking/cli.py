"""
cli.py — Command-line interface for the UAV flocking trainer and evaluator.

Usage:
    # Train with defaults (or a JSON run config) and overrides
    python -m uav_flocking.cli train --config run.json --episodes 3000 --n-min 3 --n-max 3

    # Evaluate a checkpoint on squads of 4 and 8 followers
    python -m uav_flocking.cli eval --checkpoint runs/default/checkpoints/final.ckpt --n 4 --n 8

    # Squad-growth rollout: 4 followers, 4 more join at step 100
    python -m uav_flocking.cli rollout --checkpoint final.ckpt --n 4 --steps 200 --join 100:4

    # Trajectory / learning-curve SVG
    python -m uav_flocking.cli plot runs/default/rollout.csv

    # SEMP vs CNNMP comparison over three seeds
    python -m uav_flocking.cli compare --config run.json --seeds 0 1 2

Exit codes: 0 success, 2 config error, 3 checkpoint error, 4 runtime error.
"""

import argparse
import logging
import sys
from pathlib import Path

import pandas as pd

# ── Ensure project root is on sys.path (works for both invocation styles) ─────
_PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(_PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(_PROJECT_ROOT))

# ── Bootstrap logging before any other project imports ────────────────────────
from uav_flocking.config import LOG_LEVEL
from uav_flocking.logging_config import setup_logging
setup_logging(LOG_LEVEL)

from uav_flocking.errors import ConfigError, FlockingError
from uav_flocking.eval.rollout import Scenario
from uav_flocking.eval.run_eval import print_comparison, print_summary
from uav_flocking.run_config import RunConfig, apply_overrides, load_run_config
from uav_flocking.services.flock_service import FlockService

logger = logging.getLogger(__name__)

_DIVIDER = "─" * 60


# ─── Argument parsing ─────────────────────────────────────────────────────────

def _parse_join(value: str) -> tuple[int, int]:
    try:
        step, count = value.split(":")
        return int(step), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"join must be STEP:COUNT, got {value!r}") from None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", type=str, default=None, help="JSON run config (default: built-in defaults)")
    p.add_argument("--seed", type=int, default=None, help="Global seed override")
    p.add_argument("--output-dir", type=str, default=None, help="Output directory override")


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--episodes", type=int, default=None, help="Training episodes M")
    p.add_argument("--steps", type=int, default=None, help="Steps per training episode")
    p.add_argument("--batch-size", type=int, default=None, help="Replay batch size")
    p.add_argument("--variant", choices=["SEMP", "CNNMP"], default=None, help="Embedding variant")
    p.add_argument("--n-min", type=int, default=None, help="Minimum follower count")
    p.add_argument("--n-max", type=int, default=None, help="Maximum follower count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uav_flocking",
        description="Leader-follower UAV flocking — training, evaluation and plots",
    )
    parser.add_argument(
        "--log-level",
        type=str,
        default=None,
        choices=["DEBUG", "INFO", "WARNING"],
        help="Logging verbosity (default: UAV_FLOCKING_LOG_LEVEL or INFO)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="Train actor and critic")
    _add_config_flags(p_train)
    _add_training_flags(p_train)

    p_eval = sub.add_parser("eval", help="Evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", type=str, required=True, help="Checkpoint file")
    _add_config_flags(p_eval)
    p_eval.add_argument("--n", type=int, action="append", default=None, help="Squad size (repeatable)")
    p_eval.add_argument("--episodes", type=int, default=None, help="Evaluation episodes per squad size")
    p_eval.add_argument("--steps", type=int, default=None, help="Steps per evaluation episode")
    p_eval.add_argument("--workers", type=int, default=None, help="Parallel rollout threads")
    p_eval.add_argument("--out", type=str, default=None, help="Metrics CSV path (default: <output-dir or run dir>/eval_metrics.csv)")

    p_roll = sub.add_parser("rollout", help="Fly one episode and write its trajectory CSV")
    p_roll.add_argument("--checkpoint", type=str, default=None, help="Checkpoint (omit for random policy)")
    _add_config_flags(p_roll)
    p_roll.add_argument("--n", type=int, default=4, help="Initial follower count")
    p_roll.add_argument("--steps", type=int, default=200, help="Control steps")
    p_roll.add_argument("--join", type=_parse_join, action="append", default=[],
                        help="STEP:COUNT followers joining at STEP (repeatable)")
    p_roll.add_argument("--out", type=str, default=None, help="Trajectory CSV path (default: <output_dir>/rollout.csv)")

    p_plot = sub.add_parser("plot", help="SVG from a trajectory CSV or training metrics CSV")
    p_plot.add_argument("csv", type=str, help="Input CSV")
    p_plot.add_argument("--out", type=str, default=None, help="SVG path (default: next to the CSV)")
    p_plot.add_argument("--config", "-c", type=str, default=None, help="Run config for reward band / threshold")

    p_cmp = sub.add_parser("compare", help="SEMP vs CNNMP comparison")
    _add_config_flags(p_cmp)
    _add_training_flags(p_cmp)
    p_cmp.add_argument("--seeds", type=int, nargs="+", required=True, help="Training seeds (≥ 3)")
    p_cmp.add_argument("--eval-episodes", type=int, default=None, help="Evaluation episodes per n")
    p_cmp.add_argument("--eval-steps", type=int, default=None, help="Steps per evaluation episode")
    return parser


def _resolve_config(args: argparse.Namespace, base: RunConfig | None = None) -> RunConfig:
    """--config (else `base`, else the defaults) with the command-line overrides applied."""
    cfg = load_run_config(args.config) if args.config or base is None else base
    overrides = {
        "seed": getattr(args, "seed", None),
        "output_dir": getattr(args, "output_dir", None),
        "episodes": getattr(args, "episodes", None) if args.command in ("train", "compare") else None,
        "steps": getattr(args, "steps", None) if args.command in ("train", "compare") else None,
        "batch_size": getattr(args, "batch_size", None),
        "variant": getattr(args, "variant", None),
        "n_min": getattr(args, "n_min", None),
        "n_max": getattr(args, "n_max", None),
        "eval_episodes": getattr(args, "eval_episodes", None),
        "eval_steps": getattr(args, "eval_steps", None),
        "workers": getattr(args, "workers", None),
    }
    return apply_overrides(cfg, **overrides)


# ─── Commands ─────────────────────────────────────────────────────────────────

def cmd_train(args: argparse.Namespace, service: FlockService) -> None:
    cfg = _resolve_config(args)
    result = service.train(cfg)
    print(f"\n{_DIVIDER}")
    print(f"Trained {result['episodes']} episodes → {result['output_dir']}")
    print(f"Metrics     : {result['metrics_csv']}")
    print(f"Checkpoints : {len(result['checkpoints'])} (final: {result['checkpoints'][-1]})")
    print(f"Rolling G_Avg (last window): {result['final_G_Avg_rolling']:.3f}")
    print(f"{_DIVIDER}\n")


def cmd_eval(args: argparse.Namespace, service: FlockService) -> None:
    # Without --config the checkpoint's own config is the base
    out = args.out
    if out is None and args.output_dir:
        out = Path(args.output_dir) / "eval_metrics.csv"
    result = service.evaluate(
        args.checkpoint,
        configure=lambda base: _resolve_config(args, base),
        n_values=args.n,
        episodes=args.episodes,
        steps=args.steps,
        out_csv=out,
    )
    print_summary(result["summaries"])
    print(f"Metrics CSV: {result['metrics_csv']} ({result['rows']} rows, seed {result['seed']})")


def cmd_rollout(args: argparse.Namespace, service: FlockService) -> None:
    joins: dict[int, int] = {}
    for step, count in args.join:
        joins[step] = joins.get(step, 0) + count
    try:
        scenario = Scenario(n_initial=args.n, steps=args.steps, joins=joins)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = service.rollout(
        args.checkpoint,
        scenario,
        configure=lambda base: _resolve_config(args, base),
        out_csv=args.out,
    )
    print(f"\n{_DIVIDER}")
    print(f"Trajectory : {result['trajectory_csv']} ({result['steps']} steps, seed {result['seed']})")
    print(f"Followers  : {result['n_initial']} → {result['n_final']}")
    print(f"Mean reward: {result['mean_reward']:.3f} | Collision: {result['collision_rate']:.3f}% "
          f"| Mean ρ: {result['mean_rho']:.2f} m")
    print(f"{_DIVIDER}\n")


def cmd_plot(args: argparse.Namespace, service: FlockService) -> None:
    cfg = load_run_config(args.config) if args.config else None
    result = service.plot(args.csv, args.out, cfg=cfg)
    print(f"SVG saved: {result['svg']} ({result['kind']})")


def cmd_compare(args: argparse.Namespace, service: FlockService) -> None:
    cfg = _resolve_config(args)
    result = service.compare(cfg, args.seeds)
    print_comparison(pd.DataFrame(result["table"]))
    print(f"Comparison CSV: {result['comparison_csv']}")


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "rollout": cmd_rollout,
    "plot": cmd_plot,
    "compare": cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # Re-init logging if the user changed the level
    if args.log_level:
        setup_logging(args.log_level)

    service = FlockService()
    try:
        _COMMANDS[args.command](args, service)
    except FlockingError as exc:
        logger.error("%s failed: %s", args.command, exc, exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:
        logger.error("%s failed unexpectedly: %s", args.command, exc, exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
