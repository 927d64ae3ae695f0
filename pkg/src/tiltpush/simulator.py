"""Fixed-step closed-loop simulation with scenario scheduling and telemetry.

Physics runs at ``dt_physics`` with classical RK4 on the rigid-body state;
actuators (rotor speeds, tilt, plate) advance once per physics step under a
zero-order-held command; the cascade controller runs every ``dt_control``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .actuation import BACK, ActuatorDynamics, RotorCommand, actuation_wrench, actuator_step
from .control import AttitudeErrorState, ControlGains, Setpoint, cascade_step
from .environment import WallModel, contact_force_world, ee_tip_position, ee_tip_velocity
from .so3 import Array, cross, hat, matrix_to_euler, orthonormalize
from .vehicle import (
    N_ROTORS,
    VehicleParams,
    VehicleState,
    com_displacement,
    gravity_wrench,
    inertia_diagonal,
)

STATE_DIM = 18


class IntegrationBlowupError(FloatingPointError):
    pass


class ConfigError(ValueError):
    pass


# -- rigid-body dynamics -------------------------------------------------------------


def pack(state: VehicleState) -> Array:
    return np.concatenate([state.p_w, state.R.ravel(), state.v_b, state.omega_b])


def unpack(x: Array, like: VehicleState) -> VehicleState:
    return VehicleState(
        p_w=x[0:3].copy(),
        R=x[3:12].reshape(3, 3).copy(),
        v_b=x[12:15].copy(),
        omega_b=x[15:18].copy(),
        l=like.l,
        alpha=like.alpha,
        Omega=like.Omega,
    )


@dataclass
class StateDerivative:
    p_dot: Array
    R_dot: Array
    v_dot: Array
    omega_dot: Array

    def flat(self) -> Array:
        return np.concatenate([self.p_dot, self.R_dot.ravel(), self.v_dot, self.omega_dot])


def dynamics_derivative(
    state: VehicleState,
    F_a: Array,
    Gamma_a: Array,
    F_C: Array,
    Gamma_C: Array,
    params: VehicleParams,
) -> StateDerivative:
    """Newton-Euler equations in the body frame; all wrenches body-frame."""
    R, v, w = state.R, state.v_b, state.omega_b
    m = params.m
    I = inertia_diagonal(state.l, params)
    G = gravity_wrench(R, state.l, params)
    v_dot = (F_a + F_C + G.force - cross(w, m * v)) / m
    w_dot = (Gamma_a + Gamma_C + G.torque - cross(w, I * w)) / I
    return StateDerivative(R @ v, R @ hat(w), v_dot, w_dot)


def rk4(x: Array, f: Callable[[Array], Array], dt: float) -> Array:
    """Classical fourth-order Runge-Kutta step on a flat vector."""
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def finish_step(x_next: Array) -> Array:
    if not np.all(np.isfinite(x_next)):
        raise IntegrationBlowupError("non-finite state after integration step")
    x_next[3:12] = orthonormalize(x_next[3:12].reshape(3, 3)).ravel()
    return x_next


def integrate_step(
    state: VehicleState, deriv: Callable[[VehicleState], Array], dt: float
) -> VehicleState:
    """One RK4 step of the rigid-body part of ``state``; ``R`` is re-projected on SO(3).

    ``deriv`` maps a state to the flat 18-vector derivative. Actuator fields
    (``l``, ``alpha``, ``Omega``) are carried through unchanged.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x_next = rk4(pack(state), lambda x: deriv(unpack(x, state)), dt)
    return unpack(finish_step(x_next), state)


def rigid_body_rates(
    params: VehicleParams,
    l: float,
    F_a: Array,
    Gamma_a: Array,
    wall: WallModel | None,
) -> Callable[[Array], Array]:
    """Flat-vector version of :func:`dynamics_derivative` with contact folded in.

    Used by the run loop, where actuator outputs are held over the step.
    """
    m, r_ee = params.m, params.r_ee
    I = inertia_diagonal(l, params)
    d = com_displacement(l, params)
    mg = params.weight
    if wall is not None:
        n, point = wall.normal, wall.point
        k_n, c_n, mu, k_v = wall.k_n, wall.c_n, wall.mu, wall.k_v
    out = np.empty(STATE_DIM)

    def f(x: Array) -> Array:
        p = x[0:3]
        R = x[3:12].reshape(3, 3)
        v = x[12:15]
        w = x[15:18]
        F = F_a - mg * R[2]
        G = Gamma_a + np.array([0.0, d * mg * R[2, 2], -d * mg * R[2, 1]])
        if wall is not None:
            tip = p + r_ee * R[:, 0]
            depth = -float((tip - point) @ n)
            if depth > 0.0:
                tip_vel = R @ (v + np.array([0.0, w[2] * r_ee, -w[1] * r_ee]))
                vn = float(tip_vel @ n)
                f_n = k_n * depth + c_n * max(0.0, -vn)
                f_w = f_n * n
                v_t = tip_vel - vn * n
                speed = math.sqrt(float(v_t @ v_t))
                if speed > 0.0:
                    f_w = f_w - min(mu * f_n, k_v * speed) / speed * v_t
                f_b = f_w @ R
                F = F + f_b
                G = G + np.array([0.0, -r_ee * f_b[2], r_ee * f_b[1]])
        out[0:3] = R @ v
        out[3:12] = (R @ hat(w)).ravel()
        out[12:15] = F / m - cross(w, v)
        out[15:18] = (G - cross(w, I * w)) / I
        return out.copy()

    return f


# -- scenario configuration ----------------------------------------------------------


@dataclass(frozen=True)
class Waypoint:
    """Position setpoint active from time ``t``.

    Either an absolute ``p`` or a ``delta_p``: the distance the end-effector
    target lies behind the wall along the interaction axis (negative = in front).
    """

    t: float
    delta_p: float | None = None
    p: tuple[float, float, float] | None = None
    psi: float | None = None

    def __post_init__(self) -> None:
        if (self.delta_p is None) == (self.p is None):
            raise ConfigError("waypoint needs exactly one of 'delta_p' or 'p'")
        if self.p is not None:
            object.__setattr__(self, "p", tuple(float(x) for x in self.p))


@dataclass(frozen=True)
class PlateCommand:
    t: float
    l: float


@dataclass(frozen=True)
class InitialState:
    p: tuple[float, float, float] = (0.0, 0.0, 1.0)
    yaw: float | None = None  # None: face the wall (or 0 without a wall)
    l: float = 0.0


@dataclass(frozen=True)
class SimSettings:
    dt_physics: float = 0.001
    dt_control: float = 0.004
    duration: float = 10.0
    omega_limit: float = 20.0
    seed: int = 0
    position_noise: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    gains: ControlGains = field(default_factory=ControlGains)
    actuators: ActuatorDynamics = field(default_factory=ActuatorDynamics)
    wall: WallModel | None = field(default_factory=WallModel)
    initial: InitialState = field(default_factory=InitialState)
    waypoints: tuple[Waypoint, ...] = ()
    plate: tuple[PlateCommand, ...] = ()
    sim: SimSettings = field(default_factory=SimSettings)

    def __post_init__(self) -> None:
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        object.__setattr__(self, "plate", tuple(self.plate))
        self.validate()

    @property
    def control_decimation(self) -> int:
        return int(round(self.sim.dt_control / self.sim.dt_physics))

    def validate(self) -> None:
        s = self.sim
        if not (s.dt_physics > 0.0 and s.dt_control > 0.0):
            raise ConfigError("time steps must be positive")
        if s.dt_physics > s.dt_control:
            raise ConfigError("dt_physics must not exceed dt_control")
        ratio = s.dt_control / s.dt_physics
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("dt_control must be an integer multiple of dt_physics")
        if not s.duration > 0.0:
            raise ConfigError("duration must be positive")
        if not s.omega_limit > 0.0:
            raise ConfigError("omega_limit must be positive")
        if s.position_noise < 0.0:
            raise ConfigError("position_noise must be non-negative")
        times = [w.t for w in self.waypoints]
        if times != sorted(times) or any(t < 0.0 for t in times):
            raise ConfigError("waypoint times must be non-negative and non-decreasing")
        ptimes = [c.t for c in self.plate]
        if ptimes != sorted(ptimes) or any(t < 0.0 for t in ptimes):
            raise ConfigError("plate command times must be non-negative and non-decreasing")
        for c in self.plate:
            if not 0.0 <= c.l <= self.vehicle.l_max:
                raise ConfigError(f"plate command l={c.l} outside [0, l_max={self.vehicle.l_max}]")
        if not 0.0 <= self.initial.l <= self.vehicle.l_max:
            raise ConfigError(f"initial plate position {self.initial.l} outside [0, l_max]")
        if self.wall is None and any(w.delta_p is not None for w in self.waypoints):
            raise ConfigError("delta_p waypoints need a wall")

    def initial_yaw(self) -> float:
        if self.initial.yaw is not None:
            return self.initial.yaw
        return self.wall.facing_yaw() if self.wall is not None else 0.0


def resolve_waypoint(wp: Waypoint, cfg: ScenarioConfig) -> tuple[Array, float]:
    """World position target of the body origin and its yaw reference."""
    if wp.p is not None:
        psi = wp.psi if wp.psi is not None else cfg.initial_yaw()
        return np.array(wp.p), psi
    wall = cfg.wall
    psi = wp.psi if wp.psi is not None else wall.facing_yaw()
    heading = np.array([math.cos(psi), math.sin(psi), 0.0])
    tip_target = wall.point - wall.normal * wp.delta_p
    return tip_target - heading * cfg.vehicle.r_ee, psi


# -- telemetry -----------------------------------------------------------------------

TELEMETRY_FIELDS = (
    ["t", "segment", "delta_p"]
    + [f"p_{a}" for a in "xyz"]
    + ["roll", "pitch", "yaw"]
    + [f"v_{a}" for a in "xyz"]
    + [f"omega_{a}" for a in "xyz"]
    + ["l", "d", "alpha", "alpha_cmd"]
    + [f"Omega_{i}" for i in range(1, N_ROTORS + 1)]
    + [f"sat_{i}" for i in range(1, N_ROTORS + 1)]
    + ["f_contact", "fc_x", "fc_y", "fc_z"]
    + [f"e_p_{a}" for a in "xyz"]
    + [f"e_R_{a}" for a in "xyz"]
    + ["alpha_clamped", "n_lambda_negative", "n_omega_saturated", "n_actuator_clamped"]
)


@dataclass
class SegmentSummary:
    index: int
    t_start: float
    t_end: float
    delta_p: float | None
    l_end: float
    force_mean: float
    force_std: float
    force_x_mean: float
    force_peak: float
    converged: bool
    max_saturation: float
    max_back_saturation: float
    attitude_rms: float  # RMS of the attitude tracking error |e_R|
    attitude_osc_rms: float  # RMS of roll/pitch/yaw about their segment mean

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunResult:
    status: str  # "ok" or "unstable"
    reason: str
    t_end: float
    telemetry: Array  # (n_ticks, len(TELEMETRY_FIELDS))
    segments: list[SegmentSummary]
    clamp_counts: dict[str, int]
    peak_force: float
    max_saturation: float
    attitude_rms: float

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def column(self, name: str) -> Array:
        return self.telemetry[:, TELEMETRY_FIELDS.index(name)]

    def summary(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "t_end": self.t_end,
            "peak_force": self.peak_force,
            "max_saturation": self.max_saturation,
            "attitude_rms": self.attitude_rms,
            "clamp_counts": dict(self.clamp_counts),
            "segments": [s.as_dict() for s in self.segments],
        }

    def telemetry_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TELEMETRY_FIELDS)
        for row in self.telemetry:
            writer.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


# steady window: final quarter of a segment, converged if std < 5% of mean
STEADY_FRACTION = 0.25
CONVERGED_CV = 0.05


def _segment_summaries(
    tel: Array, cfg: ScenarioConfig, t_end: float, params: VehicleParams
) -> list[SegmentSummary]:
    col = {name: i for i, name in enumerate(TELEMETRY_FIELDS)}
    t = tel[:, col["t"]]
    sat = tel[:, col["sat_1"] : col["sat_1"] + N_ROTORS]
    back = [i - 1 for i in BACK]
    e_R = tel[:, col["e_R_x"] : col["e_R_x"] + 3]
    euler = tel[:, col["roll"] : col["roll"] + 3]
    out = []
    wps = cfg.waypoints
    for k, wp in enumerate(wps):
        t0 = wp.t
        t1 = wps[k + 1].t if k + 1 < len(wps) else cfg.sim.duration
        if t0 >= t_end:
            break
        mask = (t >= t0) & (t < t1)
        if not mask.any():
            continue
        seg_t = t[mask]
        window = mask & (t >= t0 + (1.0 - STEADY_FRACTION) * (t1 - t0))
        if not window.any():
            window = mask
        f = tel[window, col["f_contact"]]
        fx_abs = np.abs(tel[window, col["fc_x"]])
        mean = float(f.mean())
        std = float(f.std())
        complete = seg_t[-1] >= t1 - 2.0 * cfg.sim.dt_control
        out.append(
            SegmentSummary(
                index=k,
                t_start=t0,
                t_end=float(seg_t[-1]),
                delta_p=wp.delta_p,
                l_end=float(tel[mask, col["l"]][-1]),
                force_mean=mean,
                force_std=std,
                force_x_mean=float(fx_abs.mean()),
                force_peak=float(tel[mask, col["f_contact"]].max()),
                converged=bool(complete and mean > 0.0 and std < CONVERGED_CV * mean),
                max_saturation=float(sat[mask].max()),
                max_back_saturation=float(sat[mask][:, back].max()),
                attitude_rms=float(np.sqrt(np.mean(np.sum(e_R[mask] ** 2, axis=1)))),
                attitude_osc_rms=_oscillation_rms(euler[mask]),
            )
        )
    return out


def _oscillation_rms(angles: Array) -> float:
    dev = angles - angles.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum(dev**2, axis=1))))


# -- main loop -----------------------------------------------------------------------


def _active(schedule, t: float):
    current = None
    for item in schedule:
        if item.t <= t + 1e-12:
            current = item
        else:
            break
    return current


def initial_state(cfg: ScenarioConfig) -> VehicleState:
    params = cfg.vehicle
    state = VehicleState.hover(params, cfg.initial.p, yaw=cfg.initial_yaw(), l=cfg.initial.l)
    if cfg.sim.position_noise > 0.0:
        rng = np.random.default_rng(cfg.sim.seed)
        state.p_w = state.p_w + rng.normal(0.0, cfg.sim.position_noise, size=3)
    return state


def run_scenario(cfg: ScenarioConfig, state: VehicleState | None = None) -> RunResult:
    """Simulate ``cfg`` and collect one telemetry row per control tick."""
    params, gains, wall = cfg.vehicle, cfg.gains, cfg.wall
    dt = cfg.sim.dt_physics
    dt_c = cfg.sim.dt_control
    decim = cfg.control_decimation
    n_steps = int(round(cfg.sim.duration / dt))

    state = initial_state(cfg) if state is None else state.copy()
    err = AttitudeErrorState()
    resolved = [resolve_waypoint(wp, cfg) for wp in cfg.waypoints]
    hold = (state.p_w.copy(), cfg.initial_yaw())


    rows: list[list[float]] = []
    clamps = {"alpha_clamped": 0, "lambda_negative": 0, "omega_saturated": 0, "actuator_clamped": 0}
    status, reason = "ok", ""
    cmd = RotorCommand(state.Omega.copy(), state.alpha)
    l_cmd = state.l
    last_actuator_clamps = 0
    t = 0.0

    for step in range(n_steps + 1):
        t = step * dt
        if step % decim == 0:
            k = None
            for idx, wp in enumerate(cfg.waypoints):
                if wp.t <= t + 1e-12:
                    k = idx
            p_des, psi_des = hold if k is None else resolved[k]
            sp = Setpoint(p_des=p_des, psi_des=psi_des)
            try:
                out = cascade_step(state, sp, err, gains, params, dt_c)
            except (ArithmeticError, ValueError) as exc:
                status, reason = "unstable", f"controller failure: {exc}"
                break
            cmd = out.command
            plate = _active(cfg.plate, t)
            if plate is not None:
                l_cmd = plate.l

            clamps["alpha_clamped"] += int(out.alpha_clamped)
            clamps["lambda_negative"] += out.n_lambda_negative
            clamps["omega_saturated"] += out.n_omega_saturated

            tip = ee_tip_position(state, params)
            f_w, f_n = (
                contact_force_world(tip, ee_tip_velocity(state, params), wall)
                if wall is not None
                else (np.zeros(3), 0.0)
            )
            wp_dp = cfg.waypoints[k].delta_p if k is not None else None
            rows.append(
                [t, -1 if k is None else k, math.nan if wp_dp is None else wp_dp]
                + list(state.p_w)
                + list(matrix_to_euler(state.R))
                + list(state.R @ state.v_b)
                + list(state.omega_b)
                + [state.l, com_displacement(state.l, params), state.alpha, cmd.alpha_cmd]
                + list(state.Omega)
                + list(state.Omega / params.omega_max)
                + [f_n, *f_w]
                + list(out.e_p)
                + list(out.e_R)
                + [
                    float(out.alpha_clamped),
                    float(out.n_lambda_negative),
                    float(out.n_omega_saturated),
                    float(last_actuator_clamps),
                ]
            )

        if step == n_steps:
            break

        upd = actuator_step(state, cmd, l_cmd, cfg.actuators, params, dt)
        last_actuator_clamps = upd.n_clamped
        clamps["actuator_clamped"] += upd.n_clamped
        state.Omega, state.alpha, state.l = upd.Omega, upd.alpha, upd.l

        act = actuation_wrench(state.Omega, state.alpha, params)
        f = rigid_body_rates(params, state.l, act.force, act.torque, wall)
        try:
            x = finish_step(rk4(pack(state), f, dt))
        except IntegrationBlowupError as exc:
            status, reason = "unstable", str(exc)
            break
        state = unpack(x, state)
        w_norm = float(np.linalg.norm(state.omega_b))
        if w_norm > cfg.sim.omega_limit:
            status, reason = "unstable", f"|omega| = {w_norm:.2f} rad/s exceeds {cfg.sim.omega_limit}"
            t = (step + 1) * dt
            break

    tel = np.array(rows, dtype=float).reshape(-1, len(TELEMETRY_FIELDS))
    segments = _segment_summaries(tel, cfg, t, params) if len(tel) else []
    col = TELEMETRY_FIELDS.index
    e_R = tel[:, col("e_R_x") : col("e_R_x") + 3] if len(tel) else np.zeros((0, 3))
    return RunResult(
        status=status,
        reason=reason,
        t_end=t,
        telemetry=tel,
        segments=segments,
        clamp_counts=clamps,
        peak_force=float(tel[:, col("f_contact")].max()) if len(tel) else 0.0,
        max_saturation=float(tel[:, col("sat_1") : col("sat_1") + N_ROTORS].max()) if len(tel) else 0.0,
        attitude_rms=float(np.sqrt(np.mean(np.sum(e_R**2, axis=1)))) if len(tel) else 0.0,
    )

