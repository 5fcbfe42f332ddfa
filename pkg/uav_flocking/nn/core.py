"""
core.py — Minimal numpy neural-network substrate with explicit backward passes.

Every layer follows the same contract:

    y  = layer.forward(x, ...)     # caches what backward needs
    dx = layer.backward(dy)        # accumulates parameter gradients, returns dL/dx

Parameters live in `layer.params` (name → array) with matching `layer.grads`.
All arithmetic is float64.

Set-valued inputs are padded to a batch tensor x of shape (B, E, F) with a
boolean mask (B, E) marking real entity rows. A single set may also be passed
as a 2-D (E, F) array, in which case every row is real.
"""

import logging
import math
from abc import ABC, abstractmethod

import numpy as np

from uav_flocking.errors import NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh", "sigmoid", "linear")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form stays finite for any finite input
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _activate(pre: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(pre, 0.0)
    if activation == "tanh":
        return np.tanh(pre)
    if activation == "sigmoid":
        return sigmoid(pre)
    return pre


def _activation_grad(pre: np.ndarray, out: np.ndarray, activation: str) -> np.ndarray | float:
    if activation == "relu":
        return (pre > 0.0).astype(np.float64)
    if activation == "tanh":
        return 1.0 - out * out
    if activation == "sigmoid":
        return out * (1.0 - out)
    return 1.0


def init_weights(
    rng: np.random.Generator, fan_out: int, fan_in: int, activation: str
) -> np.ndarray:
    """He-uniform for relu layers, Xavier-uniform otherwise."""
    if activation == "relu":
        limit = math.sqrt(6.0 / fan_in)
    else:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def _as_batch(x: np.ndarray, mask: np.ndarray | None) -> tuple[np.ndarray, np.ndarray, bool]:
    """Promote a single (E, C) set to a (1, E, C) batch with an all-true mask."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None, :, :]
    if x.ndim != 3:
        raise ShapeError(f"expected (E, C) or (B, E, C) input, got shape {x.shape}")
    if mask is None:
        mask = np.ones(x.shape[:2], dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
        if squeeze and mask.ndim == 1:
            mask = mask[None, :]
        if mask.shape != x.shape[:2]:
            raise ShapeError(f"mask shape {mask.shape} does not match input {x.shape[:2]}")
    return x, mask, squeeze


class Layer(ABC):
    """Base class: named parameters, gradient accumulators, forward/backward."""

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def zero_grad(self) -> None:
        for name, p in self.params.items():
            self.grads[name] = np.zeros_like(p)

    @abstractmethod
    def forward(self, *args, **kwargs) -> np.ndarray:
        ...

    @abstractmethod
    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        ...


# ─── Dense ────────────────────────────────────────────────────────────────────

class Dense(Layer):
    """
    activation(W·x + b) with W of shape (out, in), applied over the last axis.

    Leading axes are treated as batch axes; gradients are summed over them.
    """

    def __init__(
        self,
        in_features: int,
        out_features: int,
        activation: str = "linear",
        rng: np.random.Generator | None = None,
    ) -> None:
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["W"] = init_weights(rng, out_features, in_features, activation)
        self.params["b"] = np.zeros(out_features, dtype=np.float64)
        self.zero_grad()
        self._x: np.ndarray | None = None
        self._pre: np.ndarray | None = None
        self._out: np.ndarray | None = None

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 0 or x.shape[-1] != self.in_features:
            raise ShapeError(
                f"{type(self).__name__}: input width {x.shape[-1] if x.ndim else 0} "
                f"≠ weight cols {self.in_features}"
            )
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        pre = x @ self.params["W"].T + self.params["b"]
        out = _activate(pre, self.activation)
        self._x, self._pre, self._out = x, pre, out
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward called before forward")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if grad_out.shape != self._out.shape:
            raise ShapeError(f"upstream gradient shape {grad_out.shape} ≠ output {self._out.shape}")
        d_pre = grad_out * _activation_grad(self._pre, self._out, self.activation)
        d_pre_2d = d_pre.reshape(-1, self.out_features)
        x_2d = self._x.reshape(-1, self.in_features)
        self.grads["W"] += d_pre_2d.T @ x_2d
        self.grads["b"] += d_pre_2d.sum(axis=0)
        return d_pre @ self.params["W"]


class EntityConv(Dense):
    """
    Convolution whose filter spans one entity row: each filter is applied with
    shared weights to every entity, so output row e depends only on input row e.

    Input (E, F) or (B, E, F) → output (E, filters) or (B, E, filters).
    """

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        if x.ndim not in (2, 3):
            raise ShapeError(f"EntityConv expects (E, F) or (B, E, F), got shape {x.shape}")
        return super().forward(x)


# ─── Squeeze-and-excitation ───────────────────────────────────────────────────

class SEBlock(Layer):
    """
    Channel attention over entity rows.

        z    = mean over real entities of x            (squeeze)
        gate = sigmoid(W2 · relu(W1 · z + b1) + b2)    (excitation)
        y    = x · gate                                 (channel-wise scale)
    """

    def __init__(
        self,
        channels: int,
        reduction: int,
        rng: np.random.Generator | None = None,
    ) -> None:
        super().__init__()
        if reduction < 1 or channels % reduction:
            raise ShapeError(f"channels={channels} not divisible by reduction={reduction}")
        self.channels = channels
        self.hidden = channels // reduction
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params["W1"] = init_weights(rng, self.hidden, channels, "relu")
        self.params["b1"] = np.zeros(self.hidden, dtype=np.float64)
        self.params["W2"] = init_weights(rng, channels, self.hidden, "sigmoid")
        self.params["b2"] = np.zeros(channels, dtype=np.float64)
        self.zero_grad()
        self._cache: tuple | None = None

    def forward(self, x: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        x, mask, squeeze = _as_batch(x, mask)
        if x.shape[2] != self.channels:
            raise ShapeError(f"SEBlock: input has {x.shape[2]} channels, expected {self.channels}")
        m = mask[:, :, None].astype(np.float64)
        count = np.maximum(mask.sum(axis=1, keepdims=True), 1).astype(np.float64)   # (B, 1)
        z = (x * m).sum(axis=1) / count
        pre1 = z @ self.params["W1"].T + self.params["b1"]
        h = np.maximum(pre1, 0.0)
        gate = sigmoid(h @ self.params["W2"].T + self.params["b2"])
        out = x * gate[:, None, :]
        self._cache = (x, m, count, z, pre1, h, gate, squeeze)
        return out[0] if squeeze else out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        x, m, count, z, pre1, h, gate, squeeze = self._cache
        grad_out = np.asarray(grad_out, dtype=np.float64)
        if squeeze:
            grad_out = grad_out[None, :, :]
        if grad_out.shape != x.shape:
            raise ShapeError(f"upstream gradient shape {grad_out.shape} ≠ input {x.shape}")

        dx = grad_out * gate[:, None, :]
        d_gate = (grad_out * x * m).sum(axis=1)
        d_pre2 = d_gate * gate * (1.0 - gate)
        self.grads["W2"] += d_pre2.T @ h
        self.grads["b2"] += d_pre2.sum(axis=0)
        d_pre1 = (d_pre2 @ self.params["W2"]) * (pre1 > 0.0)
        self.grads["W1"] += d_pre1.T @ z
        self.grads["b1"] += d_pre1.sum(axis=0)
        dz = d_pre1 @ self.params["W1"]
        dx += m * (dz / count)[:, None, :]
        return dx[0] if squeeze else dx

    @property
    def last_gates(self) -> np.ndarray | None:
        return None if self._cache is None else self._cache[6]


# ─── Max-pool over entities ───────────────────────────────────────────────────

class MaxPoolEntities(Layer):
    """
    Per-channel maximum over the real entity rows of each set.

    A set with no real rows yields the all-zero vector and receives no gradient.
    Backward routes each channel's gradient to its argmax row; ties go to the
    lowest entity index.
    """

    def forward(self, x: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
        x, mask, squeeze = _as_batch(x, mask)
        batch, entities, channels = x.shape
        if squeeze and entities == 0:
            raise ShapeError("max_pool_entities needs at least one entity row")
        out = np.zeros((batch, channels), dtype=np.float64)
        has_rows = mask.any(axis=1)
        argmax = np.zeros((batch, channels), dtype=np.int64)
        if entities:
            masked = np.where(mask[:, :, None], x, -np.inf)
            argmax = masked.argmax(axis=1)
            pooled = np.take_along_axis(x, argmax[:, None, :], axis=1)[:, 0, :]
            out = np.where(has_rows[:, None], pooled, 0.0)
        self._cache = (x.shape, argmax, has_rows, squeeze)
        return out[0] if squeeze else out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        shape, argmax, has_rows, squeeze = self._cache
        grad_out = np.asarray(grad_out, dtype=np.float64).reshape(shape[0], shape[2])
        dx = np.zeros(shape, dtype=np.float64)
        if shape[1]:
            routed = np.where(has_rows[:, None], grad_out, 0.0)
            np.put_along_axis(dx, argmax[:, None, :], routed[:, None, :], axis=1)
        return dx[0] if squeeze else dx


# ─── Adam ─────────────────────────────────────────────────────────────────────

class Adam:
    """
    Adam with bias correction over a dict of named parameter arrays.

        m ← β1·m + (1 − β1)·g
        v ← β2·v + (1 − β2)·g²
        θ ← θ − lr · m̂ / (√v̂ + ε),   m̂ = m / (1 − β1ᵗ), v̂ = v / (1 − β2ᵗ)
    """

    def __init__(
        self,
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update `params` in place. Raises NonFiniteError on NaN / inf gradients."""
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(f"non-finite gradient for parameter {name!r}")

        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t

        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape {g.shape} ≠ parameter {name!r} shape {p.shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            self.m[name] *= self.beta1
            self.m[name] += (1.0 - self.beta1) * g
            self.v[name] *= self.beta2
            self.v[name] += (1.0 - self.beta2) * (g * g)
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {f"m/{k}": v for k, v in self.m.items()}
        arrays.update({f"v/{k}": v for k, v in self.v.items()})
        return arrays

    def load_state(self, t: int, arrays: dict[str, np.ndarray]) -> None:
        self.t = t
        self.m = {k[2:]: v.copy() for k, v in arrays.items() if k.startswith("m/")}
        self.v = {k[2:]: v.copy() for k, v in arrays.items() if k.startswith("v/")}
