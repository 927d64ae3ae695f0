"""Cascade controller: selective impedance -> geometric attitude -> allocation.

The outer loop turns position/velocity errors into a world-frame force demand.
Because the body cannot push along ``y_B``, any lateral part of that demand is
absorbed into a roll reference. The inner loop tracks the resulting attitude
on SO(3). The tilt angle and the eight squared rotor speeds are then resolved
from the body force and torque demands.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .actuation import BACK, RotorCommand, allocation_matrix
from .so3 import Array, cross, euler_to_matrix, hat, is_rotation, vee
from .vehicle import (
    VehicleParams,
    VehicleState,
    gravity_wrench,
    inertia_matrix,
)

log = logging.getLogger(__name__)

E3 = np.array([0.0, 0.0, 1.0])


class DegenerateDemandError(ArithmeticError):
    """The force demand leaves an angle undefined (both atan2 arguments vanish)."""


class AllocationError(ArithmeticError):
    pass


def _diag3(values, name: str) -> tuple[float, float, float]:
    t = tuple(float(v) for v in values)
    if len(t) != 3:
        raise ValueError(f"{name} needs three diagonal entries, got {len(t)}")
    return t


@dataclass(frozen=True)
class ControlGains:
    """Diagonal gain matrices, stored as their diagonals."""

    K: tuple[float, float, float] = (22.0, 22.0, 80.0)
    D: tuple[float, float, float] = (10.0, 10.0, 45.0)
    K_R: tuple[float, float, float] = (5.0, 5.0, 3.0)
    K_omega: tuple[float, float, float] = (1.0, 1.4, 0.25)
    K_I: tuple[float, float, float] = (0.0, 3.25, 0.5)
    c2: float = 0.8

    def __post_init__(self) -> None:
        for name in ("K", "D", "K_R", "K_omega", "K_I"):
            object.__setattr__(self, name, _diag3(getattr(self, name), name))
        for name in ("K", "D"):
            if min(getattr(self, name)) <= 0.0:
                raise ValueError(f"{name} must be strictly positive on the diagonal")
        for name in ("K_R", "K_omega", "K_I"):
            if min(getattr(self, name)) < 0.0:
                raise ValueError(f"{name} must be non-negative on the diagonal")
        if not self.c2 > 0.0:
            raise ValueError("c2 must be positive")

    def mat(self, name: str) -> Array:
        return np.diag(getattr(self, name))


@dataclass
class Setpoint:
    p_des: Array
    v_des: Array = field(default_factory=lambda: np.zeros(3))
    a_des: Array = field(default_factory=lambda: np.zeros(3))
    psi_des: float = 0.0
    theta_des: float = 0.0
    omega_des: Array = field(default_factory=lambda: np.zeros(3))
    omega_dot_des: Array = field(default_factory=lambda: np.zeros(3))


@dataclass
class AttitudeErrorState:
    e_R: Array = field(default_factory=lambda: np.zeros(3))
    e_omega: Array = field(default_factory=lambda: np.zeros(3))
    e_I: Array = field(default_factory=lambda: np.zeros(3))

    def integrate(self, c2: float, dt: float) -> None:
        self.e_I = self.e_I + (self.e_omega + c2 * self.e_R) * dt

    def reset(self) -> None:
        self.e_R = np.zeros(3)
        self.e_omega = np.zeros(3)
        self.e_I = np.zeros(3)


def attitude_errors(R: Array, omega: Array, R_des: Array, omega_des: Array) -> tuple[Array, Array]:
    if not (is_rotation(R) and is_rotation(R_des)):
        raise ValueError("attitude_errors needs two rotation matrices")
    e_R = 0.5 * vee(R_des.T @ R - R.T @ R_des)
    e_omega = omega - R.T @ R_des @ omega_des
    return e_R, e_omega


def attitude_control(
    err: AttitudeErrorState,
    state: VehicleState,
    R_des: Array,
    omega_des: Array,
    omega_dot_des: Array,
    gains: ControlGains,
    params: VehicleParams,
) -> Array:
    """Body torque demand of the geometric attitude law.

    The gravity term cancels the weight moment of the displaced CoM, i.e. it
    is the negative of ``gravity_wrench(...).torque``.
    """
    R, omega = state.R, state.omega_b
    I = inertia_matrix(state.l, params)
    RtRd = R.T @ R_des
    gravity_ff = -gravity_wrench(R, state.l, params).torque
    return (
        -gains.mat("K_R") @ err.e_R
        - gains.mat("K_omega") @ err.e_omega
        - gains.mat("K_I") @ err.e_I
        + cross(omega, I @ omega)
        + gravity_ff
        - I @ (hat(omega) @ RtRd @ omega_des - RtRd @ omega_dot_des)
    )


def impedance_force(
    p_w: Array,
    v_w: Array,
    omega_w: Array,
    setpoint: Setpoint,
    gains: ControlGains,
    params: VehicleParams,
) -> Array:
    """World-frame actuation force rendering the desired mass-spring-damper."""
    m = params.m
    e_p = p_w - setpoint.p_des
    e_v = v_w - setpoint.v_des
    return (
        m * setpoint.a_des
        - gains.mat("D") @ e_v
        - gains.mat("K") @ e_p
        + cross(omega_w, m * v_w)
        + params.weight * E3
    )


def _roll_args(F_w: Array, theta: float, psi: float) -> tuple[float, float]:
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(psi), math.cos(psi)
    y = sp * F_w[0] - cp * F_w[1]
    x = st * cp * F_w[0] + st * sp * F_w[1] + ct * F_w[2]
    return y, x


def desired_roll(F_w: Array, theta: float, psi: float) -> float:
    y, x = _roll_args(F_w, theta, psi)
    if y == 0.0 and x == 0.0:
        raise DegenerateDemandError("force demand leaves the roll angle undefined")
    return math.atan2(y, x)


def body_force_targets(F_w: Array, theta: float, psi: float) -> tuple[float, float]:
    """Body-frame ``(F1*, F3*)`` realising ``F_w`` once rolled by :func:`desired_roll`."""
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(psi), math.cos(psi)
    F1 = ct * cp * F_w[0] + ct * sp * F_w[1] - st * F_w[2]
    y, x = _roll_args(F_w, theta, psi)
    return F1, math.hypot(y, x)


def tilt_angle(F1: float, F3: float, Gamma2: float, params: VehicleParams) -> tuple[float, bool]:
    """Back-rotor tilt realising ``(F1, F3, Gamma2)``; returns ``(alpha, clamped)``."""
    y = F3 * params.L + Gamma2
    x = 2.0 * params.L * F1
    if y == 0.0 and x == 0.0:
        raise DegenerateDemandError("tilt angle undefined for this demand")
    alpha = math.pi / 2 - math.atan2(y, x)
    lo, hi = params.alpha_range
    clamped = min(max(alpha, lo), hi)
    if clamped != alpha:
        log.debug("tilt demand %.4f rad clamped to %.4f", alpha, clamped)
        return clamped, True
    return alpha, False


@dataclass
class Allocation:
    lam: Array
    command: RotorCommand
    n_negative: int
    n_saturated: int


def allocate(F_a: Array, Gamma_a: Array, alpha: float, params: VehicleParams) -> Allocation:
    """Minimum-norm squared rotor speeds for the demanded body wrench at tilt ``alpha``."""
    w = np.concatenate([np.asarray(F_a, dtype=float), np.asarray(Gamma_a, dtype=float)])
    if not (np.all(np.isfinite(w)) and math.isfinite(alpha)):
        raise AllocationError("non-finite wrench or tilt demand")
    lam = np.linalg.pinv(allocation_matrix(alpha, params)) @ w
    n_neg = int(np.count_nonzero(lam < 0.0))
    if n_neg:
        log.debug("%d negative speed-squares clamped to zero", n_neg)
        lam = np.maximum(lam, 0.0)
    Omega = np.sqrt(lam)
    n_sat = int(np.count_nonzero(Omega > params.omega_max))
    Omega = np.minimum(Omega, params.omega_max)
    return Allocation(lam, RotorCommand(Omega, alpha), n_neg, n_sat)


@dataclass
class CascadeOutput:
    command: RotorCommand
    phi_des: float
    R_des: Array
    F_w_des: Array
    F_b_des: Array
    Gamma_des: Array
    gravity_ff: Array
    e_p: Array
    e_R: Array
    alpha_clamped: bool
    n_lambda_negative: int
    n_omega_saturated: int

    def saturation(self, params: VehicleParams) -> Array:
        return saturation_fraction(self.command.Omega_cmd, params)

    @property
    def wrench_des(self) -> Array:
        return np.concatenate([self.F_b_des, self.Gamma_des])


def cascade_step(
    state: VehicleState,
    setpoint: Setpoint,
    err: AttitudeErrorState,
    gains: ControlGains,
    params: VehicleParams,
    dt: float,
) -> CascadeOutput:
    """One controller tick. Updates ``err`` in place (integral frozen on saturation)."""
    v_w = state.R @ state.v_b
    omega_w = state.R @ state.omega_b
    F_w = impedance_force(state.p_w, v_w, omega_w, setpoint, gains, params)

    theta, psi = setpoint.theta_des, setpoint.psi_des
    phi = desired_roll(F_w, theta, psi)
    R_des = euler_to_matrix(phi, theta, psi)

    err.e_R, err.e_omega = attitude_errors(state.R, state.omega_b, R_des, setpoint.omega_des)
    Gamma = attitude_control(
        err, state, R_des, setpoint.omega_des, setpoint.omega_dot_des, gains, params
    )
    gravity_ff = -gravity_wrench(state.R, state.l, params).torque

    F1, F3 = body_force_targets(F_w, theta, psi)
    alpha, alpha_clamped = tilt_angle(F1, F3, Gamma[1], params)
    F_b = np.array([F1, 0.0, F3])
    alloc = allocate(F_b, Gamma, alpha, params)

    if alloc.n_saturated == 0:
        err.integrate(gains.c2, dt)

    return CascadeOutput(
        command=alloc.command,
        phi_des=phi,
        R_des=R_des,
        F_w_des=F_w,
        F_b_des=F_b,
        Gamma_des=Gamma,
        gravity_ff=gravity_ff,
        e_p=state.p_w - setpoint.p_des,
        e_R=err.e_R.copy(),
        alpha_clamped=alpha_clamped,
        n_lambda_negative=alloc.n_negative,
        n_omega_saturated=alloc.n_saturated,
    )


def saturation_fraction(Omega: Array, params: VehicleParams) -> Array:
    return np.asarray(Omega) / params.omega_max


def back_rotor_indices() -> list[int]:
    return [i - 1 for i in BACK]

