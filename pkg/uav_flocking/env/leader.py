"""
leader.py — Scripted leader behaviours.

The leader is not learned. Two policies produce its (φ_d, v_d) setpoints:
  - random    : a uniformly sampled action from the follower action space,
                mapped through the same roll / speed action maps
  - waypoints : proportional heading control toward a cyclic waypoint list,
                speed held at a cruise value or perturbed randomly
"""

import logging
import math
from abc import ABC, abstractmethod

import numpy as np

from uav_flocking.config import ROLL_ACTION_MAX, SPEED_ACTION_MAX
from uav_flocking.dynamics.kinematics import UAVState, clamp, wrap_angle
from uav_flocking.env.actions import apply_roll_action, apply_velocity_action
from uav_flocking.errors import ConfigError
from uav_flocking.run_config import (
    FlockConfig,
    KinematicsConfig,
    LeaderMode,
    LeaderSpeedMode,
)

logger = logging.getLogger(__name__)


class LeaderPolicy(ABC):
    """Produces the leader's next (roll setpoint, speed setpoint)."""

    def __init__(self, kinematics: KinematicsConfig) -> None:
        self.kinematics = kinematics

    @abstractmethod
    def command(self, leader: UAVState, rng: np.random.Generator) -> tuple[float, float]:
        ...

    def _random_speed(self, leader: UAVState, rng: np.random.Generator) -> float:
        a_v = float(rng.uniform(-SPEED_ACTION_MAX, SPEED_ACTION_MAX))
        return apply_velocity_action(leader.v, a_v, self.kinematics.v_min, self.kinematics.v_max)


class RandomLeaderPolicy(LeaderPolicy):
    """Steer commands drawn uniformly from the action space."""

    def __init__(self, kinematics: KinematicsConfig) -> None:
        super().__init__(kinematics)
        self.last_action: tuple[float, float] | None = None

    def command(self, leader: UAVState, rng: np.random.Generator) -> tuple[float, float]:
        a_r = float(rng.uniform(-ROLL_ACTION_MAX, ROLL_ACTION_MAX))
        a_v = float(rng.uniform(-SPEED_ACTION_MAX, SPEED_ACTION_MAX))
        self.last_action = (a_r, a_v)
        k = self.kinematics
        return (
            apply_roll_action(leader.phi, a_r, k.r_bd),
            apply_velocity_action(leader.v, a_v, k.v_min, k.v_max),
        )


class WaypointLeaderPolicy(LeaderPolicy):
    """
    Follows a cyclic waypoint list with proportional heading control.

    A positive heading error needs ψ̇ > 0, i.e. negative roll under
    ψ̇ = −(α_g/v)·tan φ, hence φ_d = −gain · error.
    """

    def __init__(
        self,
        kinematics: KinematicsConfig,
        waypoints: list[tuple[float, float]],
        accept_radius: float,
        heading_gain: float,
        speed_mode: LeaderSpeedMode = LeaderSpeedMode.CONSTANT,
        cruise_speed: float = 15.0,
    ) -> None:
        super().__init__(kinematics)
        if not waypoints:
            raise ConfigError("waypoint leader needs at least one waypoint")
        self.waypoints = [(float(x), float(y)) for x, y in waypoints]
        self.accept_radius = accept_radius
        self.heading_gain = heading_gain
        self.speed_mode = speed_mode
        self.cruise_speed = clamp(cruise_speed, kinematics.v_min, kinematics.v_max)
        self.index = 0

    @property
    def target(self) -> tuple[float, float]:
        return self.waypoints[self.index]

    def command(self, leader: UAVState, rng: np.random.Generator) -> tuple[float, float]:
        tx, ty = self.target
        if math.hypot(tx - leader.x, ty - leader.y) < self.accept_radius:
            self.index = (self.index + 1) % len(self.waypoints)
            logger.debug("Leader reached waypoint — next index=%d", self.index)
            tx, ty = self.target

        error = wrap_angle(math.atan2(ty - leader.y, tx - leader.x) - leader.psi)
        r_bd = self.kinematics.r_bd
        phi_d = clamp(-self.heading_gain * error, -r_bd, r_bd)

        if self.speed_mode is LeaderSpeedMode.RANDOM:
            v_d = self._random_speed(leader, rng)
        else:
            v_d = self.cruise_speed
        return phi_d, v_d


def build_leader_policy(flock: FlockConfig, kinematics: KinematicsConfig) -> LeaderPolicy:
    if flock.leader_mode is LeaderMode.WAYPOINTS:
        return WaypointLeaderPolicy(
            kinematics,
            flock.waypoints,
            accept_radius=flock.waypoint_accept_radius,
            heading_gain=flock.leader_heading_gain,
            speed_mode=flock.leader_speed_mode,
            cruise_speed=flock.leader_cruise_speed,
        )
    return RandomLeaderPolicy(kinematics)


def leader_step(policy: LeaderPolicy, leader: UAVState, rng: np.random.Generator) -> tuple[float, float]:
    """Next leader setpoints (φ_d^l, v_d^l)."""
    return policy.command(leader, rng)
