"""Vertical work surface and compliant end-effector contact."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .so3 import Array, cross
from .vehicle import Frame, VehicleParams, VehicleState, Wrench


@dataclass(frozen=True)
class WallModel:
    """Infinite plane; ``normal_w`` points out of the wall toward the vehicle."""

    point_w: tuple[float, float, float] = (1.0, 0.0, 1.0)
    normal_w: tuple[float, float, float] = (-1.0, 0.0, 0.0)
    k_n: float = 1500.0
    c_n: float = 50.0
    mu: float = 1.0
    k_v: float = 200.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "point_w", tuple(float(x) for x in self.point_w))
        object.__setattr__(self, "normal_w", tuple(float(x) for x in self.normal_w))
        if len(self.point_w) != 3 or len(self.normal_w) != 3:
            raise ValueError("wall point and normal must be 3-vectors")
        if abs(math.hypot(*self.normal_w) - 1.0) > 1e-9:
            raise ValueError(f"wall normal must be unit length, got {self.normal_w}")
        for name in ("k_n", "c_n", "mu", "k_v"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def normal(self) -> Array:
        return np.array(self.normal_w)

    @property
    def point(self) -> Array:
        return np.array(self.point_w)

    def facing_yaw(self) -> float:
        """Heading that points ``x_B`` into the wall."""
        n = self.normal
        return math.atan2(-n[1], -n[0])


def ee_tip_position(state: VehicleState, params: VehicleParams) -> Array:
    return state.p_w + state.R[:, 0] * params.r_ee


def ee_tip_velocity(state: VehicleState, params: VehicleParams) -> Array:
    arm_w = state.R[:, 0] * params.r_ee
    return state.R @ state.v_b + cross(state.R @ state.omega_b, arm_w)


def contact_force_world(
    tip: Array, tip_vel: Array, wall: WallModel
) -> tuple[Array, float]:
    """World force on the tip and its normal magnitude (zero when not touching)."""
    n = wall.normal
    depth = -float(np.dot(tip - wall.point, n))
    if depth <= 0.0:
        return np.zeros(3), 0.0
    vn = float(np.dot(tip_vel, n))
    f_n = wall.k_n * depth + wall.c_n * max(0.0, -vn)
    force = f_n * n
    v_t = tip_vel - vn * n
    speed = float(np.linalg.norm(v_t))
    if speed > 0.0:
        force = force - min(wall.mu * f_n, wall.k_v * speed) * v_t / speed
    return force, f_n


def contact_wrench(state: VehicleState, wall: WallModel, params: VehicleParams) -> Wrench:
    """Body-frame wrench about the body origin from the wall pressing on the tip."""
    tip = ee_tip_position(state, params)
    f_w, _ = contact_force_world(tip, ee_tip_velocity(state, params), wall)
    f_b = state.R.T @ f_w
    torque = cross(np.array([params.r_ee, 0.0, 0.0]), f_b)
    return Wrench(f_b, torque, Frame.BODY)
