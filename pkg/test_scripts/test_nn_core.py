"""
test_nn_core.py — Layer forward values, finite-difference gradient checks and Adam.
"""

import itertools

import numpy as np
import pytest

from uav_flocking.errors import NonFiniteError, ShapeError
from uav_flocking.nn.core import Adam, Dense, EntityConv, MaxPoolEntities, SEBlock

H = 1e-5
TOL = 1e-4
INSTANCES = 100
KINK_MARGIN = 1e-3


def numeric_grad(f, arr: np.ndarray) -> np.ndarray:
    """Central differences of scalar f() w.r.t. every entry of arr (mutated in place)."""
    grad = np.zeros_like(arr)
    for idx in itertools.product(*(range(s) for s in arr.shape)):
        orig = arr[idx]
        arr[idx] = orig + H
        plus = f()
        arr[idx] = orig - H
        minus = f()
        arr[idx] = orig
        grad[idx] = (plus - minus) / (2 * H)
    return grad


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def near_zero(pre: np.ndarray) -> bool:
    """A ReLU input this close to 0 can switch side under a step of H."""
    return bool(pre.size) and float(np.min(np.abs(pre))) < KINK_MARGIN


def near_tie(x: np.ndarray, mask: np.ndarray) -> bool:
    """Two real rows of one channel within KINK_MARGIN of the maximum."""
    if x.shape[1] < 2:
        return False
    with np.errstate(invalid="ignore"):
        ranked = -np.sort(-np.where(mask[:, :, None], x, -np.inf), axis=1)
        gap = ranked[:, 0, :] - ranked[:, 1, :]
    return bool(np.any(gap < KINK_MARGIN))


def random_mask(rng: np.random.Generator, batch: int, entities: int) -> np.ndarray:
    """Padding mask with a random number (possibly 0) of leading real rows per set."""
    counts = rng.integers(0, entities + 1, size=batch)
    return np.arange(entities)[None, :] < counts[:, None]


# ─── Dense ────────────────────────────────────────────────────────────────────

def test_dense_identity_linear():
    layer = Dense(3, 3, "linear")
    layer.params["W"][...] = np.eye(3)
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(layer.forward(x), x)
    np.testing.assert_array_equal(layer.backward(np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])


def test_dense_zero_sigmoid():
    layer = Dense(4, 3, "sigmoid")
    layer.params["W"][...] = 0.0
    np.testing.assert_array_equal(layer.forward(np.ones(4)), [0.5, 0.5, 0.5])


def test_dense_hand_example():
    layer = Dense(2, 2, "relu")
    layer.params["W"][...] = [[1, 2], [3, 4]]
    np.testing.assert_array_equal(layer.forward(np.array([1.0, 1.0])), [3.0, 7.0])


def test_dense_shape_mismatch():
    with pytest.raises(ShapeError):
        Dense(3, 2).forward(np.ones(4))


def test_dense_zero_upstream_gives_zero_grads(rng):
    layer = Dense(4, 3, "tanh", rng)
    layer.forward(rng.normal(size=(5, 4)))
    layer.backward(np.zeros((5, 3)))
    assert not layer.grads["W"].any()
    assert not layer.grads["b"].any()


@pytest.mark.parametrize("activation", ["relu", "tanh", "sigmoid", "linear"])
def test_dense_gradients(activation):
    rng = np.random.default_rng(0)
    checked = 0
    while checked < INSTANCES:
        n_in, n_out, batch = (int(v) for v in rng.integers(1, 8, size=3))
        layer = Dense(n_in, n_out, activation, rng)
        layer.params["b"][...] = rng.normal(size=n_out)
        x = rng.normal(size=(batch, n_in))
        upstream = rng.normal(size=(batch, n_out))

        def loss() -> float:
            return float(np.sum(layer.forward(x) * upstream))

        layer.zero_grad()
        layer.forward(x)
        if activation == "relu" and near_zero(layer._pre):
            continue
        dx = layer.backward(upstream)
        assert rel_error(dx, numeric_grad(loss, x)) < TOL
        for name in ("W", "b"):
            assert rel_error(layer.grads[name], numeric_grad(loss, layer.params[name])) < TOL
        checked += 1


# ─── EntityConv ───────────────────────────────────────────────────────────────

def test_entity_conv_identity_filters():
    conv = EntityConv(5, 5, "linear")
    conv.params["W"][...] = np.eye(5)
    row = np.array([[1.0, -2.0, 3.0, 0.5, 15.0]])
    np.testing.assert_array_equal(conv.forward(row), row)


def test_entity_conv_weight_sharing(rng):
    conv = EntityConv(5, 8, "relu", rng)
    x = rng.normal(size=(3, 5))
    out = conv.forward(x)
    for e in range(3):
        expected = np.maximum(conv.params["W"] @ x[e] + conv.params["b"], 0.0)
        np.testing.assert_allclose(out[e], expected, atol=1e-12)
    dup = conv.forward(np.vstack([x[0], x[0]]))
    np.testing.assert_array_equal(dup[0], dup[1])


def test_entity_conv_width_mismatch(rng):
    with pytest.raises(ShapeError):
        EntityConv(5, 8, "relu", rng).forward(np.ones((3, 4)))


def test_entity_conv_gradients():
    rng = np.random.default_rng(1)
    checked = 0
    while checked < INSTANCES:
        batch, entities, width, filters = (int(v) for v in rng.integers(1, 7, size=4))
        conv = EntityConv(width, filters, "relu", rng)
        conv.params["b"][...] = rng.normal(size=filters)
        x = rng.normal(size=(batch, entities, width))
        upstream = rng.normal(size=(batch, entities, filters))

        def loss() -> float:
            return float(np.sum(conv.forward(x) * upstream))

        conv.zero_grad()
        conv.forward(x)
        if near_zero(conv._pre):
            continue
        dx = conv.backward(upstream)
        assert rel_error(dx, numeric_grad(loss, x)) < TOL
        for name in ("W", "b"):
            assert rel_error(conv.grads[name], numeric_grad(loss, conv.params[name])) < TOL
        checked += 1


# ─── SEBlock ──────────────────────────────────────────────────────────────────

def test_se_zero_input_gives_zero_output():
    se = SEBlock(8, 4)
    np.testing.assert_array_equal(se.forward(np.zeros((3, 8))), np.zeros((3, 8)))


def test_se_saturated_gates_pass_input_through(rng):
    se = SEBlock(8, 4, rng)
    se.params["W2"][...] = 0.0
    se.params["b2"][...] = 50.0
    x = rng.normal(size=(5, 8))
    np.testing.assert_allclose(se.forward(x), x, atol=1e-6)


def test_se_gates_in_open_interval(rng):
    se = SEBlock(16, 4, rng)
    for _ in range(50):
        se.forward(rng.normal(scale=3.0, size=(int(rng.integers(1, 9)), 16)))
        gates = se.last_gates
        assert np.all(gates > 0.0) and np.all(gates < 1.0)


def test_se_is_row_equivariant(rng):
    se = SEBlock(8, 2, rng)
    x = rng.normal(size=(6, 8))
    perm = rng.permutation(6)
    np.testing.assert_allclose(se.forward(x[perm]), se.forward(x)[perm], atol=1e-12)


def test_se_rejects_bad_reduction():
    with pytest.raises(ShapeError):
        SEBlock(10, 4)


def test_se_gradients_with_padding():
    rng = np.random.default_rng(2)
    checked = 0
    while checked < INSTANCES:
        reduction, hidden = int(rng.choice([1, 2, 4])), int(rng.integers(1, 4))
        batch, entities = (int(v) for v in rng.integers(1, 5, size=2))
        se = SEBlock(reduction * hidden, reduction, rng)
        se.params["b1"][...] = rng.normal(size=hidden)
        se.params["b2"][...] = rng.normal(size=se.channels)
        x = rng.normal(size=(batch, entities, se.channels))
        mask = random_mask(rng, batch, entities)
        upstream = rng.normal(size=x.shape) * mask[:, :, None]

        def loss() -> float:
            return float(np.sum(se.forward(x, mask) * upstream))

        se.zero_grad()
        se.forward(x, mask)
        # Hidden ReLU input of the excitation path
        if near_zero(se._cache[4]):
            continue
        dx = se.backward(upstream)
        assert rel_error(dx, numeric_grad(loss, x)) < TOL
        for name in ("W1", "b1", "W2", "b2"):
            assert rel_error(se.grads[name], numeric_grad(loss, se.params[name])) < TOL
        checked += 1


# ─── MaxPoolEntities ──────────────────────────────────────────────────────────

def test_max_pool_values():
    pool = MaxPoolEntities()
    np.testing.assert_array_equal(pool.forward(np.array([[1.0, 5.0]])), [1.0, 5.0])
    np.testing.assert_array_equal(pool.forward(np.array([[1.0, 5.0], [3.0, 2.0]])), [3.0, 5.0])


def test_max_pool_permutation_invariant(rng):
    pool = MaxPoolEntities()
    x = rng.normal(size=(7, 4))
    base = pool.forward(x)
    for _ in range(20):
        np.testing.assert_array_equal(pool.forward(x[rng.permutation(7)]), base)


def test_max_pool_tie_routes_to_lowest_index():
    pool = MaxPoolEntities()
    pool.forward(np.array([[1.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_array_equal(pool.backward(np.array([2.0, 3.0])), [[2.0, 3.0], [0.0, 0.0]])


def test_max_pool_empty_sets():
    pool = MaxPoolEntities()
    out = pool.forward(np.zeros((2, 0, 4)), np.zeros((2, 0), dtype=bool))
    np.testing.assert_array_equal(out, np.zeros((2, 4)))
    masked = pool.forward(np.full((1, 2, 3), 7.0), np.zeros((1, 2), dtype=bool))
    np.testing.assert_array_equal(masked, np.zeros((1, 3)))
    with pytest.raises(ShapeError):
        pool.forward(np.zeros((0, 4)))


def test_max_pool_gradients():
    rng = np.random.default_rng(3)
    pool = MaxPoolEntities()
    checked = 0
    while checked < INSTANCES:
        batch, entities, channels = (int(v) for v in rng.integers(1, 6, size=3))
        x = rng.normal(size=(batch, entities, channels))
        mask = random_mask(rng, batch, entities)
        upstream = rng.normal(size=(batch, channels))
        if near_tie(x, mask):
            continue

        def loss() -> float:
            return float(np.sum(pool.forward(x, mask) * upstream))

        pool.forward(x, mask)
        dx = pool.backward(upstream)
        assert rel_error(dx, numeric_grad(loss, x)) < TOL
        checked += 1


# ─── Adam ─────────────────────────────────────────────────────────────────────

def test_adam_first_step():
    params = {"w": np.array([1.0])}
    Adam(lr=0.001).step(params, {"w": np.array([0.1])})
    assert params["w"][0] - 1.0 == pytest.approx(-0.001, rel=1e-6)


def test_adam_zero_gradient_is_noop():
    params = {"w": np.array([1.0, -2.0])}
    Adam().step(params, {"w": np.zeros(2)})
    np.testing.assert_array_equal(params["w"], [1.0, -2.0])


def test_adam_matches_scalar_reference():
    lr, b1, b2, eps, g = 0.001, 0.9, 0.999, 1e-8, 0.3
    theta, m, v = 0.5, 0.0, 0.0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1 ** t)) / ((v / (1 - b2 ** t)) ** 0.5 + eps)

    params = {"w": np.array([0.5])}
    opt = Adam(lr, b1, b2, eps)
    for _ in range(2):
        opt.step(params, {"w": np.array([g])})
    assert params["w"][0] == pytest.approx(theta, abs=1e-12)
    assert opt.t == 2


def test_adam_rejects_non_finite():
    params = {"w": np.array([1.0])}
    with pytest.raises(NonFiniteError):
        Adam().step(params, {"w": np.array([np.nan])})
    assert params["w"][0] == 1.0
