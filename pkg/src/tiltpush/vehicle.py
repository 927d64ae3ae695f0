"""Physical parameters, state, and the CoM-dependent terms of the vehicle model.

The body frame sits at the geometric center of the H-shaped rotor layout with
``x_B`` pointing at the work surface (front rotors 1, 2, 6, 7 at ``x = +L``,
tiltable back rotors 3, 4, 5, 8 at ``x = -L``) and ``z_B`` up. The shifting
plate slides along ``+x_B``; its position ``l`` moves the CoM to ``d = m_S/m * l``.

Gravity is written as the physical wrench acting on the body,
``(0, 0, -m g)`` in the world frame, so level hover needs ``+m g`` of thrust.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .so3 import Array, cross

N_ROTORS = 8


class ParameterRangeError(ValueError):
    """Raised when an argument violates a physical bound of the vehicle."""


def _hover_speed(m: float, g: float, k_t: float) -> float:
    return math.sqrt(m * g / (N_ROTORS * k_t))


@dataclass(frozen=True)
class VehicleParams:
    m: float = 3.12
    m_S: float = 0.90
    L: float = 0.138
    W: float = 0.225
    L0: float = 0.180
    l_S: float = 0.200
    k_t: float = 1.156e-5
    k_b: float | None = None  # defaults to 0.0277 * k_t
    I_xx: float = 0.0444
    a_yy: float = 0.49
    b_yy: float = 0.0538
    a_zz: float = 0.52
    b_zz: float = 0.0795
    g_mag: float = 9.81
    omega_max: float | None = None  # defaults to twice the hover speed
    alpha_range: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    l_max: float = 0.18
    r_ee: float | None = None  # defaults to L + L0

    def __post_init__(self) -> None:
        if self.k_b is None:
            object.__setattr__(self, "k_b", 0.0277 * self.k_t)
        if self.omega_max is None:
            ok = min(self.m, self.g_mag, self.k_t) > 0.0
            object.__setattr__(
                self, "omega_max", 2.0 * _hover_speed(self.m, self.g_mag, self.k_t) if ok else math.nan
            )
        if self.r_ee is None:
            object.__setattr__(self, "r_ee", self.L + self.L0)
        object.__setattr__(self, "alpha_range", tuple(float(a) for a in self.alpha_range))
        self.validate()

    def validate(self) -> None:
        positive = (
            "m", "m_S", "L", "W", "L0", "l_S", "k_t", "k_b", "I_xx",
            "a_yy", "b_yy", "a_zz", "b_zz", "g_mag", "omega_max", "l_max", "r_ee",
        )
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ParameterRangeError(f"{name} must be strictly positive, got {value!r}")
        if self.m_S >= self.m:
            raise ParameterRangeError(f"m_S ({self.m_S}) must be below total mass m ({self.m})")
        if self.m_S / self.m * self.l_max > self.L + 1e-12:
            raise ParameterRangeError(
                f"l_max ({self.l_max}) over-displaces the CoM: "
                f"(m_S/m)*l_max = {self.m_S / self.m * self.l_max:.6g} > L = {self.L}"
            )
        travel = self.L + self.L0 - 0.5 * self.l_S
        if self.l_max > travel + 1e-12:
            raise ParameterRangeError(
                f"l_max ({self.l_max}) exceeds guiding-frame travel L + L0 - l_S/2 = {travel:.6g}"
            )
        lo, hi = self.alpha_range
        if not (-math.pi / 2 - 1e-12 <= lo < hi <= math.pi / 2 + 1e-12):
            raise ParameterRangeError(
                f"alpha_range {self.alpha_range} must be an increasing pair inside [-pi/2, pi/2]"
            )

    @property
    def omega_hover(self) -> float:
        """Equal rotor speed that balances the weight with untilted rotors."""
        return _hover_speed(self.m, self.g_mag, self.k_t)

    @property
    def weight(self) -> float:
        return self.m * self.g_mag

    def with_(self, **changes) -> VehicleParams:
        return replace(self, **changes)


@dataclass
class VehicleState:
    """Full simulator state.

    ``v_b`` and ``omega_b`` are body-frame velocities; ``R`` maps body to world.
    """

    p_w: Array = field(default_factory=lambda: np.zeros(3))
    R: Array = field(default_factory=lambda: np.eye(3))
    v_b: Array = field(default_factory=lambda: np.zeros(3))
    omega_b: Array = field(default_factory=lambda: np.zeros(3))
    l: float = 0.0
    alpha: float = 0.0
    Omega: Array = field(default_factory=lambda: np.zeros(N_ROTORS))

    def copy(self) -> VehicleState:
        return VehicleState(
            p_w=self.p_w.copy(),
            R=self.R.copy(),
            v_b=self.v_b.copy(),
            omega_b=self.omega_b.copy(),
            l=self.l,
            alpha=self.alpha,
            Omega=self.Omega.copy(),
        )

    @property
    def v_w(self) -> Array:
        return self.R @ self.v_b

    @property
    def omega_w(self) -> Array:
        return self.R @ self.omega_b

    @classmethod
    def hover(cls, params: VehicleParams, p_w=(0.0, 0.0, 1.0), yaw: float = 0.0, l: float = 0.0):
        """Level, motionless state with every rotor at the hover speed."""
        from .so3 import rot_z

        return cls(
            p_w=np.asarray(p_w, dtype=float).copy(),
            R=rot_z(yaw),
            l=l,
            Omega=np.full(N_ROTORS, params.omega_hover),
        )


class Frame(enum.Enum):
    BODY = "body"
    WORLD = "world"


@dataclass
class Wrench:
    force: Array
    torque: Array
    frame: Frame = Frame.BODY

    def expect(self, frame: Frame) -> Wrench:
        if self.frame is not frame:
            raise ValueError(f"expected a {frame.value}-frame wrench, got {self.frame.value}")
        return self

    def as_vector(self) -> Array:
        return np.concatenate([self.force, self.torque])

    def __add__(self, other: Wrench) -> Wrench:
        if other.frame is not self.frame:
            raise ValueError("cannot add wrenches expressed in different frames")
        return Wrench(self.force + other.force, self.torque + other.torque, self.frame)


def _check_plate(l: float, params: VehicleParams) -> None:
    if l < 0.0:
        raise ParameterRangeError(f"plate position l={l} is below the lower bound 0")
    if l > params.l_max + 1e-12:
        raise ParameterRangeError(f"plate position l={l} exceeds the upper bound l_max={params.l_max}")


def com_displacement(l: float, params: VehicleParams) -> float:
    """CoM offset along ``x_B`` produced by the plate at position ``l``."""
    _check_plate(l, params)
    return params.m_S / params.m * l


def inertia_diagonal(l: float, params: VehicleParams) -> Array:
    _check_plate(l, params)
    l2 = l * l
    return np.array(
        [params.I_xx, params.a_yy * l2 + params.b_yy, params.a_zz * l2 + params.b_zz]
    )


def inertia_matrix(l: float, params: VehicleParams) -> Array:
    """Diagonal inertia from the CAD regression in ``l``; ``I_xx`` is constant."""
    return np.diag(inertia_diagonal(l, params))


def gravity_wrench(R: Array, l: float, params: VehicleParams) -> Wrench:
    """Weight and its moment about the body origin, in the body frame."""
    d = com_displacement(l, params)
    f = R.T @ np.array([0.0, 0.0, -params.weight])
    torque = cross(np.array([d, 0.0, 0.0]), f)
    return Wrench(f, torque, Frame.BODY)
