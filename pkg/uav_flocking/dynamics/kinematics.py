"""
kinematics.py — Fixed-wing UAV kinematic model with stochastic disturbances.

State ξ = (x, y, ψ, φ, v):

    ẋ = v·cos ψ + η_x
    ẏ = v·sin ψ + η_y
    ψ̇ = −(α_g / v)·tan φ + η_ψ
    φ̇ = clamp((φ_d − φ) / τ_φ, ±phi_rate_max)
    v̇ = clamp((v_d − v) / τ_v, ±accel_max)

Roll and speed respond to their setpoints as rate-limited first-order lags.
One control period is integrated with explicit Euler substeps of dt_integrate;
the disturbance η is drawn once per control period and held across substeps.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from uav_flocking.errors import NonFiniteError
from uav_flocking.run_config import DisturbanceConfig, KinematicsConfig

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle in radians to [−π, π); in-range angles are returned unchanged."""
    if -math.pi <= angle < math.pi:
        return angle
    wrapped = (angle + math.pi) % _TWO_PI - math.pi
    if wrapped >= math.pi:
        wrapped -= _TWO_PI
    return wrapped


def clamp(value: float, low: float, high: float) -> float:
    return low if value < low else high if value > high else value


@dataclass(frozen=True)
class UAVState:
    """Pose / speed record of one aircraft (x, y in m; psi, phi in rad; v in m/s)."""

    x: float
    y: float
    psi: float
    phi: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi, self.phi, self.v], dtype=np.float64)

    def distance_to(self, other: "UAVState") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass
class DisturbanceModel:
    """
    Gaussian disturbance source (η_x, η_y, η_ψ) with its own RNG stream.

    With all sigmas at zero, `sample()` returns exact zeros and never touches the RNG.
    """

    sigma_x: float = 0.0
    sigma_y: float = 0.0
    sigma_psi: float = 0.0
    rng_seed: int | np.random.SeedSequence | None = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if min(self.sigma_x, self.sigma_y, self.sigma_psi) < 0:
            raise ValueError("disturbance sigmas must be non-negative")
        self._rng = np.random.default_rng(self.rng_seed)

    @classmethod
    def from_config(
        cls,
        cfg: DisturbanceConfig,
        rng_seed: int | np.random.SeedSequence | None,
        enabled: bool = True,
    ) -> "DisturbanceModel":
        if not enabled:
            return cls(rng_seed=rng_seed)
        return cls(cfg.sigma_x, cfg.sigma_y, cfg.sigma_psi, rng_seed=rng_seed)

    @property
    def is_deterministic(self) -> bool:
        return self.sigma_x == 0.0 and self.sigma_y == 0.0 and self.sigma_psi == 0.0

    def sample(self) -> tuple[float, float, float]:
        if self.is_deterministic:
            return 0.0, 0.0, 0.0
        eta = self._rng.normal(0.0, 1.0, size=3)
        return (
            float(eta[0]) * self.sigma_x,
            float(eta[1]) * self.sigma_y,
            float(eta[2]) * self.sigma_psi,
        )


# ─── Right-hand side ──────────────────────────────────────────────────────────

def _rates(
    psi: float,
    phi: float,
    v: float,
    phi_d: float,
    v_d: float,
    eta_x: float,
    eta_y: float,
    eta_psi: float,
    cfg: KinematicsConfig,
) -> tuple[float, float, float, float, float]:
    if v == 0.0:
        raise ZeroDivisionError("airspeed v = 0 makes the turn-rate term undefined")
    x_dot = v * math.cos(psi) + eta_x
    y_dot = v * math.sin(psi) + eta_y
    psi_dot = -(cfg.alpha_g / v) * math.tan(phi) + eta_psi
    phi_dot = clamp((phi_d - phi) / cfg.tau_phi, -cfg.phi_rate_max, cfg.phi_rate_max)
    v_dot = clamp((v_d - v) / cfg.tau_v, -cfg.accel_max, cfg.accel_max)
    return x_dot, y_dot, psi_dot, phi_dot, v_dot


def derivative(
    state: UAVState,
    phi_d: float,
    v_d: float,
    eta: tuple[float, float, float] | np.ndarray,
    cfg: KinematicsConfig,
) -> np.ndarray:
    """
    Time-derivative (ẋ, ẏ, ψ̇, φ̇, v̇) of one UAV.

    Raises:
        ZeroDivisionError: state.v == 0.
    """
    eta_x, eta_y, eta_psi = (float(e) for e in eta)
    return np.array(
        _rates(state.psi, state.phi, state.v, phi_d, v_d, eta_x, eta_y, eta_psi, cfg),
        dtype=np.float64,
    )


def step(
    state: UAVState,
    phi_d: float,
    v_d: float,
    disturbance: DisturbanceModel,
    cfg: KinematicsConfig,
) -> UAVState:
    """
    Advance one control period with fixed-step Euler substeps.

    Setpoints are clamped into [−r_bd, r_bd] and [v_min, v_max] first. After
    integration ψ is wrapped to [−π, π), φ clamped to [−r_bd, r_bd] and v to
    [v_min, v_max].
    """
    phi_d = clamp(phi_d, -cfg.r_bd, cfg.r_bd)
    v_d = clamp(v_d, cfg.v_min, cfg.v_max)
    eta_x, eta_y, eta_psi = disturbance.sample()
    dt = cfg.dt_integrate

    x, y, psi, phi, v = state.x, state.y, state.psi, state.phi, state.v
    for _ in range(cfg.substeps):
        x_dot, y_dot, psi_dot, phi_dot, v_dot = _rates(
            psi, phi, v, phi_d, v_d, eta_x, eta_y, eta_psi, cfg
        )
        x += dt * x_dot
        y += dt * y_dot
        psi += dt * psi_dot
        phi += dt * phi_dot
        v += dt * v_dot

    if not all(math.isfinite(c) for c in (x, y, psi, phi, v)):
        raise NonFiniteError(f"non-finite state after integration: {(x, y, psi, phi, v)}")

    return UAVState(
        x=x,
        y=y,
        psi=wrap_angle(psi),
        phi=clamp(phi, -cfg.r_bd, cfg.r_bd),
        v=clamp(v, cfg.v_min, cfg.v_max),
    )
