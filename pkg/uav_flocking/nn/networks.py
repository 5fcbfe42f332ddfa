"""
networks.py — Set-embedding trunk and the actor / critic built on it.

Topology (actor and critic identical up to the head):

    ego (9)        → Dense(ego_units, relu) ─────────────┐
    others (K × 5) → Conv1 → [SE] → Conv2 → [SE] → MaxPool ┴→ concat
                   → Dense(h1, relu) → Dense(h2, relu) → head

    actor head : Dense(2, tanh), scaled to a_r = (π/18)·o1, a_v = o2
    critic head: Dense(1, linear)

The SE blocks are present for the SEMP variant and bypassed for CNNMP.
Batches are padded: other-follower rows are stacked to (B, K, 5) with a
(B, K) mask, so one forward pass serves every follower while row b still
depends only on observation b.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from uav_flocking.config import ROLL_ACTION_MAX, SPEED_ACTION_MAX
from uav_flocking.env.state import JOINT_E_DIM, JOINT_O_DIM, Action, JointStateE, JointStateO, Observation
from uav_flocking.errors import CheckpointError, NonFiniteError, ShapeError
from uav_flocking.nn.core import Dense, EntityConv, Layer, MaxPoolEntities, SEBlock
from uav_flocking.run_config import EmbeddingConfig, EmbeddingVariant, NetworkConfig, RunConfig

logger = logging.getLogger(__name__)

ACTION_SCALE = np.array([ROLL_ACTION_MAX, SPEED_ACTION_MAX], dtype=np.float64)

# Position / angle / speed groups of each encoding
_E_POSITION, _E_ANGLE, _E_SPEED = [0, 1], [2, 3, 4, 5], [6, 7, 8]
_O_POSITION, _O_ANGLE, _O_SPEED = [0, 1], [2, 3], [4]


# ─── Input scaling ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class InputScaler:
    """Positions / d2, angles / π, speeds (v − v_mid) / v_half."""

    position_scale: float
    v_min: float
    v_max: float

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "InputScaler":
        return cls(cfg.reward.d2, cfg.kinematics.v_min, cfg.kinematics.v_max)

    @property
    def v_mid(self) -> float:
        return 0.5 * (self.v_min + self.v_max)

    @property
    def v_half(self) -> float:
        return 0.5 * (self.v_max - self.v_min)

    def scale_e(self, values: np.ndarray) -> np.ndarray:
        out = np.array(values, dtype=np.float64)
        out[..., _E_POSITION] /= self.position_scale
        out[..., _E_ANGLE] /= math.pi
        out[..., _E_SPEED] = (out[..., _E_SPEED] - self.v_mid) / self.v_half
        return out

    def scale_o(self, rows: np.ndarray) -> np.ndarray:
        out = np.array(rows, dtype=np.float64).reshape(-1, JOINT_O_DIM)
        out[..., _O_POSITION] /= self.position_scale
        out[..., _O_ANGLE] /= math.pi
        out[..., _O_SPEED] = (out[..., _O_SPEED] - self.v_mid) / self.v_half
        return out


def normalize_inputs(
    se: JointStateE, so: JointStateO, scaler: InputScaler
) -> tuple[np.ndarray, np.ndarray]:
    """Scaled copies of the ego state and other-follower rows; row order and count are kept."""
    return scaler.scale_e(se.values), scaler.scale_o(so.rows)


@dataclass
class ObservationBatch:
    ego: np.ndarray       # (B, 9)
    others: np.ndarray    # (B, K, 5)
    mask: np.ndarray      # (B, K)

    def __len__(self) -> int:
        return int(self.ego.shape[0])


def pack_observations(observations: Sequence[Observation], scaler: InputScaler) -> ObservationBatch:
    """Normalize and pad a list of observations into one batch."""
    batch = len(observations)
    k_max = max((len(so) for _, so in observations), default=0)
    ego = np.zeros((batch, JOINT_E_DIM), dtype=np.float64)
    others = np.zeros((batch, k_max, JOINT_O_DIM), dtype=np.float64)
    mask = np.zeros((batch, k_max), dtype=bool)
    for b, (se, so) in enumerate(observations):
        e_scaled, o_scaled = normalize_inputs(se, so, scaler)
        ego[b] = e_scaled
        k = len(so)
        if k:
            others[b, :k] = o_scaled
            mask[b, :k] = True
    return ObservationBatch(ego, others, mask)


# ─── Network ──────────────────────────────────────────────────────────────────

class PolicyNetwork:
    """
    Shared trunk plus a 2-unit tanh head (actor) or a 1-unit linear head (critic).

    `forward` returns raw head outputs; the actor's are in [−1, 1] and are
    turned into actions by `actions_from_output`.
    """

    def __init__(
        self,
        head: str,
        embedding: EmbeddingConfig,
        network: NetworkConfig,
        rng: np.random.Generator,
    ) -> None:
        if head not in ("actor", "critic"):
            raise ValueError(f"unknown head {head!r}")
        self.head = head
        self.variant = embedding.variant
        h1, h2 = network.hidden_units
        c1, c2 = embedding.conv1_filters, embedding.conv2_filters

        self.layers: dict[str, Layer] = {}
        self.layers["ego_dense"] = Dense(JOINT_E_DIM, network.ego_units, "relu", rng)
        self.layers["conv1"] = EntityConv(JOINT_O_DIM, c1, "relu", rng)
        if self.variant is EmbeddingVariant.SEMP:
            self.layers["se1"] = SEBlock(c1, embedding.se_reduction, rng)
        self.layers["conv2"] = EntityConv(c1, c2, "relu", rng)
        if self.variant is EmbeddingVariant.SEMP:
            self.layers["se2"] = SEBlock(c2, embedding.se_reduction, rng)
        self.layers["pool"] = MaxPoolEntities()
        self.layers["fc1"] = Dense(network.ego_units + c2, h1, "relu", rng)
        self.layers["fc2"] = Dense(h1, h2, "relu", rng)
        if head == "actor":
            self.layers["head"] = Dense(h2, 2, "tanh", rng)
        else:
            self.layers["head"] = Dense(h2, 1, "linear", rng)

        self.ego_units = network.ego_units
        self.embedding_size = c2

    @property
    def output_size(self) -> int:
        return 2 if self.head == "actor" else 1

    # ── Forward ───────────────────────────────────────────────────────────────

    def _embed_batch(self, others: np.ndarray, mask: np.ndarray) -> np.ndarray:
        h = self.layers["conv1"].forward(others)
        if "se1" in self.layers:
            h = self.layers["se1"].forward(h, mask)
        h = self.layers["conv2"].forward(h)
        if "se2" in self.layers:
            h = self.layers["se2"].forward(h, mask)
        return self.layers["pool"].forward(h, mask)

    def forward(self, batch: ObservationBatch) -> np.ndarray:
        """Raw head outputs, shape (B, output_size)."""
        ego = self.layers["ego_dense"].forward(batch.ego)
        emb = self._embed_batch(batch.others, batch.mask)
        h = np.concatenate([ego, emb], axis=1)
        h = self.layers["fc1"].forward(h)
        h = self.layers["fc2"].forward(h)
        out = self.layers["head"].forward(h)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f"{self.head} produced non-finite outputs")
        return out

    def embed(self, batch: ObservationBatch) -> np.ndarray:
        return self._embed_batch(batch.others, batch.mask)

    # ── Backward ──────────────────────────────────────────────────────────────

    def backward(self, grad_out: np.ndarray) -> None:
        """Accumulate parameter gradients for dL/d(head output) of the last forward."""
        g = self.layers["head"].backward(grad_out)
        g = self.layers["fc2"].backward(g)
        g = self.layers["fc1"].backward(g)
        g_ego, g_emb = g[:, :self.ego_units], g[:, self.ego_units:]
        self.layers["ego_dense"].backward(g_ego)
        g = self.layers["pool"].backward(g_emb)
        if "se2" in self.layers:
            g = self.layers["se2"].backward(g)
        g = self.layers["conv2"].backward(g)
        if "se1" in self.layers:
            g = self.layers["se1"].backward(g)
        self.layers["conv1"].backward(g)

    # ── Parameters ────────────────────────────────────────────────────────────

    def zero_grad(self) -> None:
        for layer in self.layers.values():
            layer.zero_grad()

    def named_parameters(self) -> dict[str, np.ndarray]:
        """'<layer>/<param>' → live parameter array (mutated in place by Adam)."""
        return {
            f"{lname}/{pname}": p
            for lname, layer in self.layers.items()
            for pname, p in layer.params.items()
        }

    def named_grads(self) -> dict[str, np.ndarray]:
        return {
            f"{lname}/{pname}": layer.grads[pname]
            for lname, layer in self.layers.items()
            for pname in layer.params
        }

    def load_parameters(self, arrays: dict[str, np.ndarray]) -> None:
        """
        Copy arrays into this network's parameters.

        Raises:
            CheckpointError: a parameter is missing, unexpected, or has the wrong
                shape; the message names the offending layer.
        """
        own = self.named_parameters()
        for name in sorted(set(arrays) - set(own)):
            raise CheckpointError(
                f"{self.head}: unexpected parameter {name!r} (layer {name.split('/')[0]!r})"
            )
        for name, p in own.items():
            layer = name.split("/")[0]
            if name not in arrays:
                raise CheckpointError(f"{self.head}: layer {layer!r} missing parameter {name!r}")
            src = np.asarray(arrays[name], dtype=np.float64)
            if src.shape != p.shape:
                raise CheckpointError(
                    f"{self.head}: layer {layer!r} shape mismatch for {name!r} — "
                    f"checkpoint {src.shape}, config {p.shape}"
                )
            p[...] = src

    def parameter_count(self) -> int:
        return sum(p.size for p in self.named_parameters().values())


def actions_from_output(out: np.ndarray) -> np.ndarray:
    """tanh outputs (B, 2) → actions in action units (B, 2)."""
    return out * ACTION_SCALE


# ─── Actor / critic pair ──────────────────────────────────────────────────────

@dataclass
class PolicyNetworks:
    """Actor and critic sharing one architecture description."""

    actor: PolicyNetwork
    critic: PolicyNetwork
    scaler: InputScaler

    def pack(self, observations: Sequence[Observation]) -> ObservationBatch:
        return pack_observations(observations, self.scaler)

    def act(self, observations: Sequence[Observation]) -> np.ndarray:
        """Deterministic actions (B, 2) for a list of observations in one pass."""
        if not observations:
            return np.zeros((0, 2), dtype=np.float64)
        return actions_from_output(self.actor.forward(self.pack(observations)))

    def value(self, observations: Sequence[Observation]) -> np.ndarray:
        if not observations:
            return np.zeros(0, dtype=np.float64)
        return self.critic.forward(self.pack(observations))[:, 0]


def build_policy_networks(cfg: RunConfig, rng: np.random.Generator) -> PolicyNetworks:
    actor = PolicyNetwork("actor", cfg.embedding, cfg.network, rng)
    critic = PolicyNetwork("critic", cfg.embedding, cfg.network, rng)
    logger.info(
        "Networks built — variant=%s, actor_params=%d, critic_params=%d",
        cfg.embedding.variant.value, actor.parameter_count(), critic.parameter_count(),
    )
    return PolicyNetworks(actor, critic, InputScaler.from_config(cfg))


# ─── Single-observation entry points ──────────────────────────────────────────

def embed(so: JointStateO, network: PolicyNetwork, scaler: InputScaler) -> np.ndarray:
    """Fixed-length embedding of one set of other-follower rows; zeros for an empty set."""
    if so.rows.shape[1] != JOINT_O_DIM:
        raise ShapeError(f"other-follower rows must have width {JOINT_O_DIM}")
    placeholder = JointStateE(np.zeros(JOINT_E_DIM))
    return network.embed(pack_observations([(placeholder, so)], scaler))[0]


def actor_forward(se: JointStateE, so: JointStateO, networks: PolicyNetworks) -> Action:
    return Action.from_array(networks.act([(se, so)])[0])


def critic_forward(se: JointStateE, so: JointStateO, networks: PolicyNetworks) -> float:
    return float(networks.value([(se, so)])[0])
