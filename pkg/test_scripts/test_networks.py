"""
test_networks.py — Input scaling, set embedding properties, actor/critic outputs and gradients.
"""

import itertools
import math

import numpy as np
import pytest

from uav_flocking.env.environment import reset_episode
from uav_flocking.env.state import Action, JointStateE, JointStateO
from uav_flocking.errors import CheckpointError, NonFiniteError
from uav_flocking.nn.core import Dense, SEBlock
from uav_flocking.nn.networks import (
    InputScaler,
    actor_forward,
    build_policy_networks,
    critic_forward,
    embed,
    normalize_inputs,
)
from uav_flocking.run_config import apply_overrides, parse_run_config

H = 1e-5


def _networks(cfg, seed: int = 0):
    return build_policy_networks(cfg, np.random.default_rng(seed))


def _observations(cfg, n: int, seed: int = 0):
    return reset_episode(cfg, seed=seed, n=n).observations()


def _rel_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def _random_observation(rng: np.random.Generator, k: int) -> tuple[JointStateE, JointStateO]:
    se = JointStateE(np.concatenate([
        rng.uniform(-80, 80, 2), rng.uniform(-math.pi, math.pi, 1),
        rng.uniform(-math.pi / 6, math.pi / 6, 3), rng.uniform(12, 18, 3),
    ]))
    so = JointStateO(np.column_stack([
        rng.uniform(-80, 80, (k, 2)), rng.uniform(-math.pi, math.pi, k),
        rng.uniform(-math.pi / 6, math.pi / 6, k), rng.uniform(12, 18, k),
    ]))
    return se, so


def _randomize_biases(nets, rng: np.random.Generator) -> None:
    for net in (nets.actor, nets.critic):
        for p in net.named_parameters().values():
            if p.ndim == 1:
                p[...] = rng.normal(scale=0.1, size=p.shape)


def _near_kink(net, batch, margin: float = 1e-3) -> bool:
    """True when a ReLU input or a pooled maximum of the last forward sits within margin of a switch."""
    net.forward(batch)
    for layer in net.layers.values():
        if isinstance(layer, Dense) and layer.activation == "relu":
            if layer._pre.size and np.min(np.abs(layer._pre)) < margin:
                return True
        if isinstance(layer, SEBlock) and np.min(np.abs(layer._cache[4])) < margin:
            return True
    if "se2" in net.layers:
        x, _, _, _, _, _, gate, _ = net.layers["se2"]._cache
        pooled_in = x * gate[:, None, :]
    else:
        pooled_in = net.layers["conv2"]._out
    if pooled_in.shape[1] < 2:
        return False
    with np.errstate(invalid="ignore"):
        ranked = -np.sort(-np.where(batch.mask[:, :, None], pooled_in, -np.inf), axis=1)
        gap = ranked[:, 0, :] - ranked[:, 1, :]
    # Ties at 0 come from rows that stay switched off
    return bool(np.any((gap < margin) & (ranked[:, 0, :] > 0.0)))


# ─── Input scaling ────────────────────────────────────────────────────────────

def test_normalize_inputs_examples(default_cfg):
    scaler = InputScaler.from_config(default_cfg)
    se = JointStateE(np.array([65.0, -32.5, math.pi / 2, 0, 0, 0, 15.0, 18.0, 12.0]))
    so = JointStateO(np.array([[130.0, 0.0, -math.pi, 0.0, 15.0]]))
    e, o = normalize_inputs(se, so, scaler)
    np.testing.assert_allclose(e, [1.0, -0.5, 0.5, 0, 0, 0, 0.0, 1.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(o, [[2.0, 0.0, -1.0, 0.0, 0.0]], atol=1e-12)
    # Inputs are not modified
    assert se[0] == 65.0


def test_normalize_keeps_row_count(default_cfg):
    scaler = InputScaler.from_config(default_cfg)
    _, o = normalize_inputs(JointStateE(np.zeros(9)), JointStateO(np.zeros((0, 5))), scaler)
    assert o.shape == (0, 5)


# ─── Embedding ────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("variant", ["SEMP", "CNNMP"])
def test_embedding_is_permutation_invariant(small_cfg, variant):
    cfg = apply_overrides(small_cfg, variant=variant)
    nets = _networks(cfg)
    rng = np.random.default_rng(5)
    for k in (1, 2, 5, 9):
        so = JointStateO(np.column_stack([
            rng.uniform(-80, 80, (k, 2)), rng.uniform(-math.pi, math.pi, (k, 2)), rng.uniform(12, 18, k),
        ]))
        base = embed(so, nets.actor, nets.scaler)
        assert base.shape == (cfg.embedding.conv2_filters,)
        for _ in range(10):
            shuffled = embed(so.permuted(rng.permutation(k)), nets.actor, nets.scaler)
            np.testing.assert_allclose(shuffled, base, rtol=1e-9, atol=1e-12)


def test_embedding_actor_and_critic_are_permutation_invariant(small_cfg):
    rng = np.random.default_rng(6)
    configs = [apply_overrides(small_cfg, variant=v) for v in ("SEMP", "CNNMP")]
    for trial in range(1000):
        nets = _networks(configs[trial % 2], seed=trial)
        _randomize_biases(nets, rng)
        se, so = _random_observation(rng, int(rng.integers(2, 10)))
        shuffled = so.permuted(rng.permutation(len(so)))

        np.testing.assert_allclose(
            embed(shuffled, nets.actor, nets.scaler), embed(so, nets.actor, nets.scaler), rtol=0, atol=1e-9,
        )
        action, moved = actor_forward(se, so, nets), actor_forward(se, shuffled, nets)
        assert moved.a_r == pytest.approx(action.a_r, abs=1e-9)
        assert moved.a_v == pytest.approx(action.a_v, abs=1e-9)
        assert critic_forward(se, shuffled, nets) == pytest.approx(critic_forward(se, so, nets), abs=1e-9)


def test_empty_set_embeds_to_zeros(small_cfg):
    nets = _networks(small_cfg)
    out = embed(JointStateO(np.zeros((0, 5))), nets.actor, nets.scaler)
    np.testing.assert_array_equal(out, np.zeros(small_cfg.embedding.conv2_filters))


def test_duplicate_rows_do_not_change_embedding(small_cfg):
    # Max-pool only: with SE the squeeze mean is also unchanged by duplication
    nets = _networks(apply_overrides(small_cfg, variant="CNNMP"))
    row = np.array([[30.0, 10.0, 0.2, 0.0, 15.0], [-20.0, 40.0, -1.0, 0.1, 13.0]])
    once = embed(JointStateO(row), nets.actor, nets.scaler)
    twice = embed(JointStateO(np.vstack([row, row])), nets.actor, nets.scaler)
    np.testing.assert_allclose(once, twice, atol=1e-12)


def test_cnnmp_has_no_se_layers(small_cfg):
    semp = _networks(small_cfg)
    cnnmp = _networks(apply_overrides(small_cfg, variant="CNNMP"))
    assert "se1" in semp.actor.layers and "se2" in semp.actor.layers
    assert "se1" not in cnnmp.actor.layers and "se2" not in cnnmp.critic.layers
    assert cnnmp.actor.parameter_count() < semp.actor.parameter_count()


# ─── Actor / critic outputs ───────────────────────────────────────────────────

def test_zero_weights_give_zero_outputs(small_cfg):
    nets = _networks(small_cfg)
    for net in (nets.actor, nets.critic):
        for p in net.named_parameters().values():
            p[...] = 0.0
    for se, so in _observations(small_cfg, 3):
        action = actor_forward(se, so, nets)
        assert (action.a_r, action.a_v) == (0.0, 0.0)
        assert critic_forward(se, so, nets) == 0.0


def test_actions_stay_in_range(small_cfg):
    nets = _networks(small_cfg, seed=3)
    for p in nets.actor.named_parameters().values():
        p *= 25.0
    for seed in range(10):
        actions = nets.act(_observations(small_cfg, 6, seed))
        assert np.all(np.abs(actions[:, 0]) <= math.pi / 18)
        assert np.all(np.abs(actions[:, 1]) <= 1.0)
        for row in actions:
            Action.from_array(row)


def test_batched_outputs_match_single_observations(small_cfg):
    nets = _networks(small_cfg)
    obs = _observations(small_cfg, 5) + [(JointStateE(np.zeros(9)), JointStateO(np.zeros((0, 5))))]
    batched_a, batched_v = nets.act(obs), nets.value(obs)
    for b, (se, so) in enumerate(obs):
        single = actor_forward(se, so, nets)
        assert single.a_r == pytest.approx(batched_a[b, 0], abs=1e-10)
        assert single.a_v == pytest.approx(batched_a[b, 1], abs=1e-10)
        assert critic_forward(se, so, nets) == pytest.approx(batched_v[b], abs=1e-10)


def test_empty_batch(small_cfg):
    nets = _networks(small_cfg)
    assert nets.act([]).shape == (0, 2)
    assert nets.value([]).shape == (0,)


def test_non_finite_output_raises(small_cfg):
    nets = _networks(small_cfg)
    nets.critic.layers["head"].params["b"][...] = np.nan
    with pytest.raises(NonFiniteError):
        nets.value(_observations(small_cfg, 2))


def test_load_parameters_names_mismatched_layer(small_cfg):
    nets = _networks(small_cfg)
    arrays = {k: v.copy() for k, v in nets.actor.named_parameters().items()}
    arrays["fc1/W"] = np.zeros((3, 3))
    with pytest.raises(CheckpointError, match="fc1"):
        nets.actor.load_parameters(arrays)
    del arrays["fc1/W"]
    with pytest.raises(CheckpointError, match="fc1"):
        nets.actor.load_parameters(arrays)


# ─── End-to-end gradients ─────────────────────────────────────────────────────

@pytest.mark.parametrize("head, variant", [("critic", "SEMP"), ("actor", "SEMP"), ("critic", "CNNMP")])
def test_network_gradients_match_finite_differences(small_cfg, head, variant):
    cfg = apply_overrides(small_cfg, variant=variant)
    nets = _networks(cfg, seed=11)
    net = getattr(nets, head)
    rng = np.random.default_rng(2)
    for p in net.named_parameters().values():
        if p.ndim == 1:
            p[...] = rng.normal(scale=0.1, size=p.shape)
    batch = nets.pack(_observations(cfg, 4, seed=1) + _observations(cfg, 2, seed=2))
    upstream = rng.normal(size=(len(batch), net.output_size))

    def loss() -> float:
        return float(np.sum(net.forward(batch) * upstream))

    net.zero_grad()
    net.forward(batch)
    net.backward(upstream)
    grads = net.named_grads()

    for name, p in net.named_parameters().items():
        numeric = np.zeros_like(p)
        for idx in itertools.product(*(range(s) for s in p.shape)):
            orig = p[idx]
            p[idx] = orig + H
            plus = loss()
            p[idx] = orig - H
            minus = loss()
            p[idx] = orig
            numeric[idx] = (plus - minus) / (2 * H)
        assert _rel_error(grads[name], numeric) < 1e-4, name


@pytest.mark.slow
@pytest.mark.parametrize("head", ["actor", "critic"])
@pytest.mark.parametrize("variant", ["SEMP", "CNNMP"])
def test_network_gradients_on_random_instances(small_cfg, head, variant):
    data = small_cfg.model_dump(mode="json")
    data["embedding"] = {"conv1_filters": 4, "conv2_filters": 8, "se_reduction": 2, "variant": variant}
    data["network"] = {"ego_units": 4, "hidden_units": [6, 4]}
    cfg = parse_run_config(data)
    rng = np.random.default_rng(31)
    checked = attempts = 0
    while checked < 100:
        attempts += 1
        assert attempts < 1000, "too many instances rejected near a ReLU or max-pool switch"
        nets = _networks(cfg, seed=attempts)
        _randomize_biases(nets, rng)
        net = getattr(nets, head)
        batch = nets.pack([_random_observation(rng, int(rng.integers(0, 6))) for _ in range(3)])
        if _near_kink(net, batch):
            continue
        upstream = rng.normal(size=(len(batch), net.output_size))

        def loss() -> float:
            return float(np.sum(net.forward(batch) * upstream))

        net.zero_grad()
        net.forward(batch)
        net.backward(upstream)
        grads = {k: v.copy() for k, v in net.named_grads().items()}
        for name, p in net.named_parameters().items():
            numeric = np.zeros_like(p)
            for idx in itertools.product(*(range(s) for s in p.shape)):
                orig = p[idx]
                p[idx] = orig + H
                plus = loss()
                p[idx] = orig - H
                minus = loss()
                p[idx] = orig
                numeric[idx] = (plus - minus) / (2 * H)
            assert _rel_error(grads[name], numeric) < 1e-4, (attempts, name)
        checked += 1
