"""
plot_tool.py — Static SVG figures for trajectories, learning curves and comparisons.

Trajectory figure panels (one episode):
  - top-down trajectories of the leader and every follower
  - leader distance ρ per follower vs time, with the [d1, d2] band
  - minimum pairwise follower distance vs time, with the collision threshold

SVG output is byte-stable for identical inputs (fixed hash salt, no date).
"""

import logging
import time
from pathlib import Path

import matplotlib
matplotlib.use("Agg")   # Non-interactive backend (no display required)
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from uav_flocking.config import COLLISION_THRESHOLD, D1, D2

logger = logging.getLogger(__name__)

_SVG_RC = {"svg.hashsalt": "uav_flocking", "svg.fonttype": "none"}


# ─── Derived series ───────────────────────────────────────────────────────────

def select_episode(df: pd.DataFrame, episode: int | None = None) -> pd.DataFrame:
    """Rows of one episode (the first one present when `episode` is None)."""
    if df.empty:
        return df
    if episode is None:
        episode = int(df["episode"].min())
    return df[df["episode"] == episode]


def distance_series(df: pd.DataFrame) -> pd.DataFrame:
    """Columns t, uav_id, rho: distance of each follower to the leader per step."""
    if df.empty:
        return pd.DataFrame(columns=["t", "uav_id", "rho"])
    leader = df[df["role"] == "leader"][["t", "x", "y"]].rename(columns={"x": "lx", "y": "ly"})
    followers = df[df["role"] == "follower"][["t", "uav_id", "x", "y"]]
    merged = followers.merge(leader, on="t", how="inner")
    merged["rho"] = np.hypot(merged["x"] - merged["lx"], merged["y"] - merged["ly"])
    return merged[["t", "uav_id", "rho"]].sort_values(["uav_id", "t"]).reset_index(drop=True)


def min_distance_series(df: pd.DataFrame) -> pd.Series:
    """Minimum pairwise follower distance per step (steps with < 2 followers omitted)."""
    values = {}
    followers = df[df["role"] == "follower"]
    for t, step_df in followers.groupby("t", sort=True):
        if len(step_df) < 2:
            continue
        xy = step_df[["x", "y"]].to_numpy(dtype=float)
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        values[int(t)] = float(dist[np.triu_indices(len(xy), k=1)].min())
    return pd.Series(values, name="min_distance", dtype=float)


# ─── Figures ──────────────────────────────────────────────────────────────────

def build_trajectory_figure(
    df: pd.DataFrame,
    episode: int | None = None,
    d1: float = D1,
    d2: float = D2,
    threshold: float = COLLISION_THRESHOLD,
) -> plt.Figure:
    """Three-panel figure; an empty frame yields labelled axes with no data lines."""
    ep = select_episode(df, episode)
    fig, (ax_traj, ax_rho, ax_min) = plt.subplots(1, 3, figsize=(16, 5))

    for uid, uav_df in ep.groupby("uav_id", sort=True):
        uav_df = uav_df.sort_values("t")
        if (uav_df["role"] == "leader").all():
            style = {"linewidth": 2.0, "color": "black", "label": "leader"}
        else:
            style = {"linewidth": 1.0, "label": f"follower #{uid}"}
        ax_traj.plot(uav_df["x"].to_numpy(), uav_df["y"].to_numpy(), **style)
    ax_traj.set_title("Trajectories")
    ax_traj.set_xlabel("x (m)")
    ax_traj.set_ylabel("y (m)")
    ax_traj.set_aspect("equal", adjustable="datalim")
    if not ep.empty:
        ax_traj.legend(fontsize=7, loc="best")

    rho = distance_series(ep)
    for uid, uav_rho in rho.groupby("uav_id", sort=True):
        ax_rho.plot(uav_rho["t"].to_numpy(), uav_rho["rho"].to_numpy(), linewidth=1.0, label=f"#{uid}")
    ax_rho.axhspan(d1, d2, color="tab:green", alpha=0.1)
    ax_rho.set_title("Distance to leader")
    ax_rho.set_xlabel("t (s)")
    ax_rho.set_ylabel("ρ (m)")

    min_dist = min_distance_series(ep)
    if not min_dist.empty:
        ax_min.plot(min_dist.index.to_numpy(), min_dist.to_numpy(), color="tab:red", linewidth=1.0)
    ax_min.axhline(threshold, color="black", linestyle="--", linewidth=0.8)
    ax_min.set_title("Minimum pairwise distance")
    ax_min.set_xlabel("t (s)")
    ax_min.set_ylabel("distance (m)")

    for ax in (ax_traj, ax_rho, ax_min):
        ax.grid(linestyle="--", alpha=0.5)
    fig.tight_layout()
    return fig


def build_learning_curve_figure(metrics: pd.DataFrame) -> plt.Figure:
    """Episode G_Avg and its rolling average from a training metrics frame."""
    fig, ax = plt.subplots(figsize=(9, 5))
    if not metrics.empty:
        ax.plot(metrics["episode"].to_numpy(), metrics["G_Avg"].to_numpy(),
                linewidth=0.6, alpha=0.4, label="episode")
        ax.plot(metrics["episode"].to_numpy(), metrics["G_Avg_rolling"].to_numpy(),
                linewidth=1.5, label="rolling average")
        ax.legend()
    ax.set_title("Learning curve")
    ax.set_xlabel("episode")
    ax.set_ylabel("average reward")
    ax.grid(linestyle="--", alpha=0.5)
    fig.tight_layout()
    return fig


def build_comparison_figure(per_episode: pd.DataFrame) -> plt.Figure:
    """Box plots of per-episode G_Avg and collision rate per (variant, n)."""
    fig, (ax_r, ax_c) = plt.subplots(1, 2, figsize=(14, 5))
    groups = list(per_episode.groupby(["variant", "n"], sort=True)) if not per_episode.empty else []
    labels = [f"{variant}\nn={n}" for (variant, n), _ in groups]
    if groups:
        ax_r.boxplot([g["G_Avg"].to_numpy() for _, g in groups])
        ax_c.boxplot([g["collision_rate"].to_numpy() for _, g in groups])
        for ax in (ax_r, ax_c):
            ax.set_xticks(range(1, len(labels) + 1))
            ax.set_xticklabels(labels, fontsize=8)
    ax_r.set_title("Average reward per episode")
    ax_c.set_title("Collision rate per episode (%)")
    for ax in (ax_r, ax_c):
        ax.grid(axis="y", linestyle="--", alpha=0.5)
    fig.tight_layout()
    return fig


def save_svg(fig: plt.Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


# ─── Entry points ─────────────────────────────────────────────────────────────

def plot_trajectory(
    df: pd.DataFrame,
    out_path: str | Path,
    episode: int | None = None,
    d1: float = D1,
    d2: float = D2,
    threshold: float = COLLISION_THRESHOLD,
) -> Path:
    t0 = time.perf_counter()
    path = save_svg(build_trajectory_figure(df, episode, d1, d2, threshold), out_path)
    logger.info("Trajectory plot saved to %s (%.3fs)", path, time.perf_counter() - t0)
    return path


def plot_learning_curve(metrics: pd.DataFrame, out_path: str | Path) -> Path:
    path = save_svg(build_learning_curve_figure(metrics), out_path)
    logger.info("Learning curve saved to %s", path)
    return path


def plot_comparison(per_episode: pd.DataFrame, out_path: str | Path) -> Path:
    path = save_svg(build_comparison_figure(per_episode), out_path)
    logger.info("Comparison plot saved to %s", path)
    return path
