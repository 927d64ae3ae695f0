"""Rotor model, body-frame actuation wrench, allocation matrix and actuator lag.

Rotor layout (coaxial pairs share a position, spins alternate with index):

    front-left  1, 6   (x=+L, y=-W)      back-left  4, 5   (x=-L, y=-W)
    front-right 2, 7   (x=+L, y=+W)      back-right 3, 8   (x=-L, y=+W)

The back rotors tilt together by ``alpha`` about ``y_B``; positive ``alpha``
points their thrust toward ``+x_B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .so3 import Array
from .vehicle import N_ROTORS, Frame, ParameterRangeError, VehicleParams, VehicleState, Wrench

FRONT = (1, 2, 6, 7)
BACK = (3, 4, 5, 8)
# rotor index -> (x sign, y sign)
ROTOR_SIDES = {1: (1, -1), 6: (1, -1), 2: (1, 1), 7: (1, 1), 3: (-1, 1), 8: (-1, 1), 4: (-1, -1), 5: (-1, -1)}


def spin_sign(i: int) -> int:
    return -1 if i % 2 else 1


@dataclass(frozen=True)
class RotorCommand:
    Omega_cmd: Array
    alpha_cmd: float

    def clamped(self, params: VehicleParams) -> tuple[RotorCommand, int]:
        """Return the command inside actuator limits and the number of clamped entries."""
        Omega = np.clip(self.Omega_cmd, 0.0, params.omega_max)
        lo, hi = params.alpha_range
        alpha = min(max(self.alpha_cmd, lo), hi)
        n = int(np.count_nonzero(Omega != self.Omega_cmd)) + int(alpha != self.alpha_cmd)
        return RotorCommand(Omega, alpha), n


@dataclass(frozen=True)
class ActuatorDynamics:
    tau_rotor: float = 0.05
    alpha_rate_max: float = 2.0
    l_rate_max: float = 0.01

    def __post_init__(self) -> None:
        for name in ("tau_rotor", "alpha_rate_max", "l_rate_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ParameterRangeError(f"{name} must be strictly positive, got {value!r}")


def rotor_thrust(Omega, params: VehicleParams):
    """Thrust ``k_t * Omega**2`` of one rotor (vectorised over ``Omega``)."""
    Omega = np.asarray(Omega, dtype=float)
    if np.any(Omega < 0.0):
        raise ParameterRangeError("rotor speed must be non-negative")
    out = params.k_t * Omega**2
    return float(out) if out.ndim == 0 else out


def rotor_drag_torque(i: int, Omega: float, params: VehicleParams) -> float:
    """Reaction torque of rotor ``i`` (1-based); odd indices spin the negative way."""
    if not 1 <= i <= N_ROTORS:
        raise ParameterRangeError(f"rotor index must be in 1..{N_ROTORS}, got {i}")
    if Omega < 0.0:
        raise ParameterRangeError("rotor speed must be non-negative")
    return spin_sign(i) * params.k_b * Omega * Omega


def actuation_wrench(Omega, alpha: float, params: VehicleParams) -> Wrench:
    """Body-frame force and torque produced by the eight rotors at tilt ``alpha``."""
    Om = np.asarray(Omega, dtype=float)
    T = {i: params.k_t * Om[i - 1] ** 2 for i in range(1, 9)}
    tau = {i: spin_sign(i) * params.k_b * Om[i - 1] ** 2 for i in range(1, 9)}
    ca, sa = math.cos(alpha), math.sin(alpha)
    W, L = params.W, params.L

    T_back = T[3] + T[4] + T[5] + T[8]
    T_front = T[1] + T[2] + T[6] + T[7]
    tau_back = tau[3] + tau[4] + tau[5] + tau[8]
    tau_front = tau[1] + tau[2] + tau[6] + tau[7]

    force = np.array([T_back * sa, 0.0, T_back * ca + T_front])
    torque = np.array(
        [
            (T[2] + T[7] - T[1] - T[6] + (T[3] + T[8] - T[4] - T[5]) * ca) * W + tau_back * sa,
            T_back * ca * L - T_front * L,
            (T[4] + T[5] - T[3] - T[8]) * sa * W + tau_back * ca + tau_front,
        ]
    )
    return Wrench(force, torque, Frame.BODY)


def allocation_matrix(alpha: float, params: VehicleParams) -> Array:
    """6x8 map from squared rotor speeds to the stacked body wrench (F, Gamma)."""
    kt, kb, L, W = params.k_t, params.k_b, params.L, params.W
    ca, sa = math.cos(alpha), math.sin(alpha)
    H = np.zeros((6, N_ROTORS))
    for i in range(1, 9):
        ys = ROTOR_SIDES[i][1]
        s = spin_sign(i)
        col = H[:, i - 1]
        if i in FRONT:
            col[2] = kt
            col[3] = ys * W * kt
            col[4] = -L * kt
            col[5] = s * kb
        else:
            col[0] = kt * sa
            col[2] = kt * ca
            col[3] = ys * W * kt * ca + s * kb * sa
            col[4] = L * kt * ca
            col[5] = -ys * W * kt * sa + s * kb * ca
    return H


class ActuatorUpdate(NamedTuple):
    Omega: Array
    alpha: float
    l: float
    n_clamped: int


def _slew(x: float, target: float, max_step: float) -> float:
    return x + min(max(target - x, -max_step), max_step)


def actuator_step(
    state: VehicleState,
    cmd: RotorCommand,
    l_cmd: float,
    dyn: ActuatorDynamics,
    params: VehicleParams,
    dt: float,
) -> ActuatorUpdate:
    """Advance rotor speeds (first-order lag), tilt and plate (rate-limited) by ``dt``."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    cmd, n = cmd.clamped(params)
    l_target = min(max(l_cmd, 0.0), params.l_max)
    n += int(l_target != l_cmd)

    decay = math.exp(-dt / dyn.tau_rotor)
    Omega = cmd.Omega_cmd + (state.Omega - cmd.Omega_cmd) * decay
    Omega = np.clip(Omega, 0.0, params.omega_max)
    lo, hi = params.alpha_range
    alpha = min(max(_slew(state.alpha, cmd.alpha_cmd, dyn.alpha_rate_max * dt), lo), hi)
    l = min(max(_slew(state.l, l_target, dyn.l_rate_max * dt), 0.0), params.l_max)
    return ActuatorUpdate(Omega, alpha, l, n)
