"""
replay.py — Shared experience replay memory.

All followers write into one ring buffer (centralized learning). Eviction is
strictly FIFO once `capacity` is reached; a batch is drawn uniformly without
replacement.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from uav_flocking.env.state import Action, Observation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Experience:
    """One (s, a, r, s′) transition of a single follower."""

    s: Observation
    a: Action
    r: float
    s_next: Observation

    def __post_init__(self) -> None:
        if not math.isfinite(self.r) or self.r > 0.0:
            raise ValueError(f"reward must be finite and ≤ 0, got {self.r!r}")


class ReplayMemory:
    """Fixed-capacity ring buffer of Experience with uniform sampling."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Experience | None] = [None] * capacity
        self.ptr = 0
        self.size = 0
        self.total_pushed = 0

    def push(self, experience: Experience) -> None:
        """Store a transition, overwriting the oldest one when full."""
        self._items[self.ptr] = experience
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.total_pushed += 1

    def extend(self, experiences: list[Experience]) -> None:
        for exp in experiences:
            self.push(exp)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Experience]:
        """Draw `batch_size` distinct transitions uniformly at random."""
        if batch_size > self.size:
            raise ValueError(f"cannot sample {batch_size} from {self.size} stored transitions")
        indices = rng.choice(self.size, size=batch_size, replace=False)
        return [self._items[self._slot(int(i))] for i in indices]

    def _slot(self, age_index: int) -> int:
        # age_index 0 is the oldest stored transition
        start = self.ptr if self.size == self.capacity else 0
        return (start + age_index) % self.capacity

    def oldest(self) -> Experience | None:
        return self._items[self._slot(0)] if self.size else None

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        for k in range(self.size):
            yield self._items[self._slot(k)]
