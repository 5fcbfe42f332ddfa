"""
state.py — Joint-state and action value types of the flocking MDP.

JointStateE is the 9-component ego-follower / leader joint state:
    s1, s2  position of the ego-follower relative to the leader, leader frame (m)
    s3      heading difference ψ_e − ψ_l, wrapped to [−π, π)
    s4      ego roll, s5 leader roll, s6 leader roll setpoint (rad)
    s7      ego speed, s8 leader speed, s9 leader speed setpoint (m/s)

JointStateO holds one 5-component row per other follower, in stable follower
index order:
    (Δx, Δy) in the ego frame, heading difference ψ_j − ψ_e, roll φ_j, speed v_j
"""

import math
from dataclasses import dataclass

import numpy as np

from uav_flocking.config import ROLL_ACTION_MAX, SPEED_ACTION_MAX
from uav_flocking.errors import ActionRangeError, ShapeError

JOINT_E_DIM = 9
JOINT_O_DIM = 5
_BOUND_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class JointStateE:
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != (JOINT_E_DIM,):
            raise ShapeError(f"JointStateE needs {JOINT_E_DIM} components, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def rho(self) -> float:
        """Leader–ego distance."""
        return math.hypot(self.values[0], self.values[1])

    @property
    def heading_difference(self) -> float:
        return float(self.values[2])

    def __getitem__(self, index: int) -> float:
        return float(self.values[index])


@dataclass(frozen=True, eq=False)
class JointStateO:
    rows: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.rows, dtype=np.float64)
        if arr.size == 0:
            arr = np.zeros((0, JOINT_O_DIM), dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != JOINT_O_DIM:
            raise ShapeError(f"JointStateO rows must have width {JOINT_O_DIM}, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    @property
    def distances(self) -> np.ndarray:
        """Ego distance to each other follower, row order preserved."""
        return np.hypot(self.rows[:, 0], self.rows[:, 1])

    def permuted(self, order: np.ndarray | list[int]) -> "JointStateO":
        return JointStateO(self.rows[np.asarray(order, dtype=int)])


@dataclass(frozen=True)
class Action:
    """Roll action a_r (rad, |a_r| ≤ π/18) and speed action a_v (m/s, |a_v| ≤ 1)."""

    a_r: float
    a_v: float

    def __post_init__(self) -> None:
        if abs(self.a_r) > ROLL_ACTION_MAX + _BOUND_TOL:
            raise ActionRangeError(f"a_r={self.a_r!r} outside [−π/18, π/18]")
        if abs(self.a_v) > SPEED_ACTION_MAX + _BOUND_TOL:
            raise ActionRangeError(f"a_v={self.a_v!r} outside [−1, 1]")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Action":
        return cls(float(arr[0]), float(arr[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.a_r, self.a_v], dtype=np.float64)


Observation = tuple[JointStateE, JointStateO]
