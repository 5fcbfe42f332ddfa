"""
actions.py — Roll / speed action maps to the next setpoints.

    φ_d = clamp(φ + a_r, −r_bd, r_bd)
    v_d = clamp(v + a_v, v_min, v_max)
"""

import math

from uav_flocking.config import ROLL_ACTION_MAX, SPEED_ACTION_MAX
from uav_flocking.dynamics.kinematics import clamp
from uav_flocking.errors import ActionRangeError

_BOUND_TOL = 1e-12


def apply_roll_action(phi: float, a_r: float, r_bd: float) -> float:
    """Next roll-angle setpoint from current roll φ and roll action a_r."""
    if not math.isfinite(a_r) or abs(a_r) > ROLL_ACTION_MAX + _BOUND_TOL:
        raise ActionRangeError(f"roll action {a_r!r} outside [−π/18, π/18]")
    return clamp(phi + a_r, -r_bd, r_bd)


def apply_velocity_action(v: float, a_v: float, v_min: float, v_max: float) -> float:
    """Next airspeed setpoint from current airspeed v and speed action a_v."""
    if not math.isfinite(a_v) or abs(a_v) > SPEED_ACTION_MAX + _BOUND_TOL:
        raise ActionRangeError(f"velocity action {a_v!r} outside [−1, 1]")
    return clamp(v + a_v, v_min, v_max)
