"""
test_evaluation.py — Metrics, frozen-policy rollouts, squad growth and the comparison table.
"""

import itertools
import json

import numpy as np
import pandas as pd
import pytest

from uav_flocking.dynamics.kinematics import UAVState
from uav_flocking.errors import ConfigError, MetricsError
from uav_flocking.eval.metrics import (
    EpisodeLog,
    StepRecord,
    average_reward,
    collision_rate,
    count_pair_steps,
    mean_reward,
    min_pairwise_distance,
    recompute_rewards,
)
from uav_flocking.eval.rollout import RANDOM_POLICY_ID, Scenario, rollout, squad_growth_scenario
from uav_flocking.eval.run_eval import (
    COMPARISON_COLUMNS,
    METRICS_COLUMNS,
    compare_embeddings,
    comparison_table,
    evaluate_policy,
    run_episodes,
    write_comparison,
)
from uav_flocking.nn.networks import build_policy_networks

LEADER = UAVState(0, 0, 0, 0, 15)


def _record(t: int, followers: list[UAVState], rewards: list[float]) -> StepRecord:
    return StepRecord(t, LEADER, list(range(1, len(followers) + 1)), followers, rewards)


def _pair(distance: float) -> list[UAVState]:
    return [UAVState(50, 0, 0, 0, 15), UAVState(50 + distance, 0, 0, 0, 15)]


# ─── Average reward ───────────────────────────────────────────────────────────

def test_average_reward_example():
    log = EpisodeLog(0, 0, 2, steps=[
        _record(1, _pair(10), [-1.0, -2.0]),
        _record(2, _pair(10), [-3.0, -4.0]),
    ])
    assert average_reward([log], n=2, episodes=1, steps=2) == pytest.approx(-2.5)
    assert mean_reward([log]) == pytest.approx(-2.5)


def test_average_reward_rejects_incomplete_logs():
    log = EpisodeLog(0, 0, 2, steps=[_record(1, _pair(10), [-1.0, -2.0])])
    with pytest.raises(MetricsError):
        average_reward([log], n=2, episodes=1, steps=2)
    with pytest.raises(MetricsError):
        average_reward([log], n=3, episodes=1, steps=1)
    with pytest.raises(MetricsError):
        average_reward([log], n=2, episodes=2, steps=1)


def test_step_record_length_mismatch():
    with pytest.raises(MetricsError):
        _record(1, _pair(10), [-1.0])


def test_mean_reward_without_samples():
    with pytest.raises(MetricsError):
        mean_reward([EpisodeLog(0, 0, 2)])


# ─── Collisions ───────────────────────────────────────────────────────────────

def test_collision_rate_counts_pair_steps():
    steps = [_record(t, _pair(1.5 if t == 1 else 20.0), [0.0, 0.0]) for t in range(1, 1001)]
    log = EpisodeLog(0, 0, 2, steps=steps)
    assert count_pair_steps([log], 2.0) == (1, 1000)
    assert collision_rate([log], 2.0) == pytest.approx(0.1)


def test_collision_rate_threshold_is_strict():
    log = EpisodeLog(0, 0, 2, steps=[_record(1, _pair(2.0), [0.0, 0.0])])
    assert collision_rate([log], 2.0) == 0.0


def test_collision_rate_without_pairs():
    log = EpisodeLog(0, 0, 1, steps=[_record(1, [UAVState(5, 5, 0, 0, 15)], [0.0])])
    assert collision_rate([log], 2.0) == 0.0
    assert collision_rate([], 2.0) == 0.0


def test_collision_rate_matches_brute_force(small_cfg):
    logs = run_episodes(None, small_cfg, Scenario(n_initial=6, steps=30), episodes=3, seed=4)
    threshold = 25.0
    violations = total = 0
    for log in logs:
        for rec in log.steps:
            for a, b in itertools.combinations(rec.followers, 2):
                total += 1
                violations += a.distance_to(b) < threshold
    assert collision_rate(logs, threshold) == pytest.approx(100.0 * violations / total)


def test_min_pairwise_distance():
    states = [UAVState(0, 0, 0, 0, 15), UAVState(3, 4, 0, 0, 15), UAVState(10, 0, 0, 0, 15)]
    assert min_pairwise_distance(states) == pytest.approx(5.0)
    assert np.isnan(min_pairwise_distance(states[:1]))


# ─── Rollouts ─────────────────────────────────────────────────────────────────

def test_rollout_is_deterministic(small_cfg, rng):
    nets = build_policy_networks(small_cfg, rng)
    scenario = Scenario(n_initial=3, steps=8)
    a = rollout(nets, small_cfg, scenario, seed=11)
    b = rollout(nets, small_cfg, scenario, seed=11)
    assert a.policy_id == "SEMP"
    for ra, rb in zip(a.steps, b.steps):
        assert ra.followers == rb.followers
        np.testing.assert_array_equal(ra.rewards, rb.rewards)
    c = rollout(nets, small_cfg, scenario, seed=12)
    assert c.steps[-1].followers != a.steps[-1].followers


def test_rollout_records_post_step_states(small_cfg):
    log = rollout(None, small_cfg, Scenario(n_initial=3, steps=4), seed=0)
    assert log.policy_id == RANDOM_POLICY_ID
    assert [rec.t for rec in log.steps] == [1, 2, 3, 4]
    assert all(np.all(rec.rewards <= 0.0) for rec in log.steps)


def test_logged_rewards_recompute_from_states(small_cfg):
    log = rollout(None, small_cfg, Scenario(n_initial=5, steps=10), seed=2)
    for rec in log.steps:
        np.testing.assert_allclose(recompute_rewards(rec, small_cfg.reward), rec.rewards, atol=1e-9)


def test_zero_length_scenario(small_cfg):
    log = rollout(None, small_cfg, Scenario(n_initial=3, steps=0), seed=0)
    assert log.num_steps == 0
    assert log.reward_samples().size == 0
    assert np.isnan(log.mean_leader_distance())


def test_squad_growth(small_cfg, rng):
    nets = build_policy_networks(small_cfg, rng)
    log = rollout(nets, small_cfg, Scenario(n_initial=3, steps=10, joins={5: 4}), seed=0)
    assert [rec.n for rec in log.steps] == [3] * 5 + [7] * 5
    assert log.steps[-1].follower_ids == [1, 2, 3, 4, 5, 6, 7]
    assert all(len(rec.rewards) == rec.n for rec in log.steps)


def test_squad_growth_defaults():
    scenario = squad_growth_scenario()
    assert (scenario.n_initial, scenario.steps, scenario.joins) == (4, 200, {100: 4})


@pytest.mark.parametrize("kwargs", [
    {"n_initial": 3, "steps": 10, "joins": {10: 1}},
    {"n_initial": 3, "steps": 10, "joins": {2: 0}},
    {"n_initial": 0, "steps": 10},
    {"n_initial": 3, "steps": -1},
])
def test_invalid_scenarios(kwargs):
    with pytest.raises(ValueError):
        Scenario(**kwargs)


def test_worker_count_does_not_change_results(small_cfg, rng):
    nets = build_policy_networks(small_cfg, rng)
    scenario = Scenario(n_initial=3, steps=6)
    serial = run_episodes(nets, small_cfg, scenario, episodes=4, seed=1, workers=1)
    threaded = run_episodes(nets, small_cfg, scenario, episodes=4, seed=1, workers=3)
    for a, b in zip(serial, threaded):
        assert a.episode == b.episode
        np.testing.assert_array_equal(a.reward_samples(), b.reward_samples())


# ─── Evaluation / comparison ──────────────────────────────────────────────────

def test_evaluate_policy_rows_and_summary(small_cfg, rng):
    nets = build_policy_networks(small_cfg, rng)
    metrics, summary = evaluate_policy(nets, small_cfg, n=2)
    assert list(metrics.columns) == METRICS_COLUMNS
    assert len(metrics) == small_cfg.evaluation.episodes
    assert (metrics["n"] == 2).all()
    assert summary["G_Avg"] == pytest.approx(metrics["G_Avg"].mean())
    assert summary["G_Avg"] <= 0.0


def test_comparison_table_statistics():
    per_episode = pd.DataFrame({
        "variant": ["SEMP"] * 3 + ["CNNMP"] * 3,
        "n": [4] * 6,
        "seed": [0, 1, 2] * 2,
        "episode": [0] * 6,
        "G_Avg": [-1.0, -2.0, -3.0, -4.0, -4.0, -4.0],
        "collision_rate": [0.0, 0.5, 1.0, 2.0, 2.0, 2.0],
    })
    table = comparison_table(per_episode)
    assert list(table.columns) == COMPARISON_COLUMNS
    semp = table[table["variant"] == "SEMP"].iloc[0]
    values = np.array([-1.0, -2.0, -3.0])
    two_pass = float(np.sum((values - values.mean()) ** 2) / len(values))
    assert semp["reward_avg"] == pytest.approx(-2.0)
    assert semp["reward_var"] == pytest.approx(two_pass)
    assert semp["collision_var"] == pytest.approx(1.0 / 6.0)
    cnnmp = table[table["variant"] == "CNNMP"].iloc[0]
    assert cnnmp["reward_var"] == 0.0


def test_comparison_table_empty():
    assert list(comparison_table(pd.DataFrame(columns=METRICS_COLUMNS)).columns) == COMPARISON_COLUMNS


def test_compare_needs_three_seeds(small_cfg):
    with pytest.raises(ConfigError):
        compare_embeddings(small_cfg, seeds=[0, 1])


def test_write_comparison_sidecar(tmp_path):
    table = pd.DataFrame([["SEMP", 4, -1.0, 0.1, 0.0, 0.0]], columns=COMPARISON_COLUMNS)
    path = write_comparison(table, tmp_path / "comparison.csv", [0, 1, 2])
    assert pd.read_csv(path).shape == (1, len(COMPARISON_COLUMNS))
    meta = json.loads((tmp_path / "comparison.meta.json").read_text())
    assert meta["seeds"] == [0, 1, 2]


@pytest.mark.slow
def test_compare_embeddings_end_to_end(small_cfg, tmp_path):
    table, per_episode = compare_embeddings(small_cfg, seeds=[0, 1, 2], output_dir=tmp_path)
    assert len(table) == 2 * len(small_cfg.evaluation.n_values)
    expected_rows = 2 * 3 * len(small_cfg.evaluation.n_values) * small_cfg.evaluation.episodes
    assert len(per_episode) == expected_rows
