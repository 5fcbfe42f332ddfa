"""
checkpoint.py — Versioned binary container for actor / critic parameters.

Byte layout (all integers little-endian):

    offset  size  field
    0       8     magic  b"UAVFLCK\\x00"
    8       4     format version (uint32, currently 1)
    12      4     header length H (uint32)
    16      H     UTF-8 JSON header
    16+H    ...   payload: float64 little-endian arrays, back to back

Header keys:
    config_digest  SHA-256 of the canonical run config
    config         the full run config (JSON object)
    episode        episodes completed when written
    variant        embedding variant ("SEMP" / "CNNMP")
    adam           {"actor": {t, lr, beta1, beta2, epsilon}, "critic": {...}}
    arrays         [{name, shape, offset, count}], offset in bytes from payload start

Array names:
    actor/<layer>/<param>, critic/<layer>/<param>
    adam/actor/m/<layer>/<param>, adam/actor/v/<layer>/<param>  (and critic)
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from uav_flocking.errors import CheckpointError
from uav_flocking.nn.core import Adam
from uav_flocking.nn.networks import PolicyNetworks, build_policy_networks
from uav_flocking.run_config import RunConfig, config_digest, parse_run_config

logger = logging.getLogger(__name__)

MAGIC = b"UAVFLCK\x00"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sII")


@dataclass
class Checkpoint:
    episode: int
    variant: str
    config_digest: str
    config: dict[str, Any]
    arrays: dict[str, np.ndarray]
    adam: dict[str, dict[str, float]] = field(default_factory=dict)

    def prefixed(self, prefix: str) -> dict[str, np.ndarray]:
        """Arrays under `prefix/`, with the prefix stripped."""
        cut = len(prefix) + 1
        return {k[cut:]: v for k, v in self.arrays.items() if k.startswith(prefix + "/")}

    def run_config(self) -> RunConfig:
        return parse_run_config(self.config)


def _adam_scalars(opt: Adam) -> dict[str, float]:
    return {"t": opt.t, "lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "epsilon": opt.epsilon}


def save_checkpoint(
    path: str | Path,
    networks: PolicyNetworks,
    cfg: RunConfig,
    episode: int,
    actor_opt: Adam | None = None,
    critic_opt: Adam | None = None,
) -> Path:
    """Write networks (and optimizer moments when given) to `path`."""
    path = Path(path)
    arrays: dict[str, np.ndarray] = {}
    for name, p in networks.actor.named_parameters().items():
        arrays[f"actor/{name}"] = p
    for name, p in networks.critic.named_parameters().items():
        arrays[f"critic/{name}"] = p
    adam: dict[str, dict[str, float]] = {}
    for label, opt in (("actor", actor_opt), ("critic", critic_opt)):
        if opt is None:
            continue
        adam[label] = _adam_scalars(opt)
        for name, arr in opt.state_arrays().items():
            arrays[f"adam/{label}/{name}"] = arr

    entries = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        data = np.ascontiguousarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(data.shape), "offset": offset, "count": int(data.size)})
        raw = data.tobytes()
        chunks.append(raw)
        offset += len(raw)

    header = {
        "config_digest": config_digest(cfg),
        "config": cfg.model_dump(mode="json"),
        "episode": int(episode),
        "variant": cfg.embedding.variant.value,
        "adam": adam,
        "arrays": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for raw in chunks:
            f.write(raw)
    logger.info("Checkpoint saved — path=%s, episode=%d, arrays=%d", path, episode, len(entries))
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    """
    Parse a checkpoint file.

    Raises:
        CheckpointError: missing file, bad magic, unsupported version, truncated
            payload, or an unreadable header.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _PREAMBLE.size:
        raise CheckpointError(f"{path}: file too short to be a checkpoint")
    magic, version, header_len = _PREAMBLE.unpack_from(blob, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    start = _PREAMBLE.size
    try:
        header = json.loads(blob[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header — {exc}") from exc

    payload = memoryview(blob)[start + header_len:]
    arrays: dict[str, np.ndarray] = {}
    try:
        for entry in header["arrays"]:
            end = entry["offset"] + 8 * entry["count"]
            if end > len(payload):
                raise CheckpointError(f"{path}: payload truncated at array {entry['name']!r}")
            arr = np.frombuffer(payload, dtype="<f8", count=entry["count"], offset=entry["offset"])
            arrays[entry["name"]] = arr.astype(np.float64).reshape(entry["shape"])
        ckpt = Checkpoint(
            episode=int(header["episode"]),
            variant=str(header["variant"]),
            config_digest=str(header["config_digest"]),
            config=header["config"],
            arrays=arrays,
            adam=header.get("adam", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed header — {exc}") from exc
    logger.info("Checkpoint loaded — path=%s, episode=%d, variant=%s", path, ckpt.episode, ckpt.variant)
    return ckpt


def restore_networks(ckpt: Checkpoint, cfg: RunConfig | None = None) -> PolicyNetworks:
    """
    Build networks for `cfg` (default: the checkpoint's own config) and load the
    stored parameters into them.

    Raises:
        CheckpointError: topology mismatch; the message names the layer.
    """
    if cfg is None:
        cfg = ckpt.run_config()
    elif config_digest(cfg) != ckpt.config_digest:
        logger.warning("Config digest differs from checkpoint — loading by topology only")
    if ckpt.variant != cfg.embedding.variant.value:
        raise CheckpointError(
            f"checkpoint variant {ckpt.variant} does not match config variant "
            f"{cfg.embedding.variant.value}"
        )
    networks = build_policy_networks(cfg, np.random.default_rng(0))
    networks.actor.load_parameters(ckpt.prefixed("actor"))
    networks.critic.load_parameters(ckpt.prefixed("critic"))
    return networks


def restore_optimizer(ckpt: Checkpoint, label: str) -> Adam:
    """Adam state for 'actor' or 'critic'; a fresh optimizer if none was stored."""
    scalars = ckpt.adam.get(label)
    if scalars is None:
        return Adam()
    opt = Adam(scalars["lr"], scalars["beta1"], scalars["beta2"], scalars["epsilon"])
    opt.load_state(int(scalars["t"]), ckpt.prefixed(f"adam/{label}"))
    return opt
