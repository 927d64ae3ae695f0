from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tiltpush.config import case2_template, hover_template
from tiltpush.environment import WallModel, contact_wrench
from tiltpush.simulator import (
    TELEMETRY_FIELDS,
    ConfigError,
    IntegrationBlowupError,
    ScenarioConfig,
    SimSettings,
    Waypoint,
    dynamics_derivative,
    finish_step,
    integrate_step,
    pack,
    resolve_waypoint,
    rigid_body_rates,
    run_scenario,
)
from tiltpush.so3 import euler_to_matrix
from tiltpush.vehicle import VehicleParams, VehicleState, com_displacement, inertia_diagonal

from oracles import mechanical_energy
from scenario_runs import spinning_arc_error

P = VehicleParams()
Z3 = np.zeros(3)
G = 9.81

vec = arrays(np.float64, 3, elements=st.floats(-1.0, 1.0))


def free_rates(state):
    return dynamics_derivative(state, Z3, Z3, Z3, Z3, P).flat()


class TestDerivative:
    def test_free_fall(self):
        s = VehicleState(R=euler_to_matrix(0.0, 0.0, 0.7))
        d = dynamics_derivative(s, Z3, Z3, Z3, Z3, P)
        np.testing.assert_allclose(s.R @ d.v_dot, [0, 0, -G], atol=1e-12)

    def test_pure_yaw_torque(self):
        d = dynamics_derivative(VehicleState(), np.array([0, 0, 30.6072]), np.array([0, 0, 0.0795]), Z3, Z3, P)
        np.testing.assert_allclose(d.omega_dot, [0, 0, 1.0], atol=1e-12)
        np.testing.assert_allclose(d.v_dot, 0.0, atol=1e-12)

    @settings(deadline=None)
    @given(
        st.floats(0.0, P.l_max), st.floats(0.0, 0.03),
        st.floats(-0.4, 0.4), st.floats(-0.4, 0.4), st.floats(-0.4, 0.4),
        vec, vec, vec, vec,
    )
    def test_fast_rates_match_reference(self, l, depth, a, b, c, v, w, F, T):
        """The flat run-loop derivative agrees with the structured one plus contact."""
        wall = WallModel()
        R = euler_to_matrix(a, b, c)
        tip_target = np.array([1.0 + depth, 0.0, 1.0])
        s = VehicleState(p_w=tip_target - P.r_ee * R[:, 0], R=R, v_b=v, omega_b=w, l=l)
        C = contact_wrench(s, wall, P)
        ref = dynamics_derivative(s, 10 * F, T, C.force, C.torque, P).flat()
        fast = rigid_body_rates(P, l, 10 * F, T, wall)(pack(s))
        np.testing.assert_allclose(fast, ref, rtol=1e-12, atol=1e-12)


class TestIntegrator:
    def test_ballistic_from_rest(self):
        s = VehicleState(p_w=np.array([0, 0, 10.0]))
        for _ in range(1000):
            s = integrate_step(s, free_rates, 0.001)
        assert abs(s.p_w[2] - (10.0 - 0.5 * G)) < 1e-8

    def test_rotation_closure(self):
        s = VehicleState(omega_b=np.array([0, 0, 1.0]))
        n = 6283
        dt = 2 * math.pi / n

        def spin(state):
            d = dynamics_derivative(state, np.array([0, 0, P.weight]), Z3, Z3, Z3, P)
            return d.flat()

        for _ in range(n):
            s = integrate_step(s, spin, dt)
        np.testing.assert_allclose(s.R, np.eye(3), atol=1e-6)

    def test_orthonormality_maintained(self):
        s = VehicleState(omega_b=np.array([1.3, -0.7, 2.1]), l=0.12)
        for _ in range(5000):
            s = integrate_step(s, free_rates, 0.002)
            assert np.abs(s.R.T @ s.R - np.eye(3)).max() < 1e-9

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            integrate_step(VehicleState(), free_rates, 0.0)

    def test_blowup_detected(self):
        with pytest.raises(IntegrationBlowupError):
            finish_step(np.full(18, np.nan))

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, P.l_max), vec, vec, st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
    def test_energy_conserved_without_actuation(self, l, v, w, a, b, c):
        s = VehicleState(p_w=np.array([0, 0, 5.0]), R=euler_to_matrix(a, b, c), v_b=v, omega_b=2 * w, l=l)
        I, d = inertia_diagonal(l, P), com_displacement(l, P)
        E0 = mechanical_energy(P.m, I, G, d, s.p_w, s.R, s.v_b, s.omega_b)
        for _ in range(1000):
            s = integrate_step(s, free_rates, 0.001)
        E1 = mechanical_energy(P.m, I, G, d, s.p_w, s.R, s.v_b, s.omega_b)
        assert abs(E1 - E0) < 1e-7 * max(1.0, abs(E0))


def test_fourth_order_convergence():
    e = [spinning_arc_error(dt) for dt in (0.04, 0.02, 0.01)]
    assert e[0] / e[1] >= 12.0 and e[1] / e[2] >= 12.0


class TestScenarioConfig:
    def test_waypoint_needs_one_target(self):
        with pytest.raises(ConfigError):
            Waypoint(t=0.0)
        with pytest.raises(ConfigError):
            Waypoint(t=0.0, delta_p=0.1, p=(0, 0, 1))

    def test_step_ratio(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(sim=SimSettings(dt_physics=0.003, dt_control=0.004))
        assert ScenarioConfig().control_decimation == 4

    def test_delta_p_needs_wall(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(wall=None, waypoints=(Waypoint(t=0.0, delta_p=0.2),))

    def test_resolve_contact_setpoint(self):
        cfg = ScenarioConfig()
        p, psi = resolve_waypoint(Waypoint(t=0.0, delta_p=0.6), cfg)
        # tip target 0.6 m behind the wall at x = 1
        np.testing.assert_allclose(p, [1.6 - 0.318, 0.0, 1.0], atol=1e-12)
        assert psi == 0.0


class TestRuns:
    def test_hover_holds_position(self):
        r = run_scenario(hover_template(10.0))
        assert r.ok
        drift = np.linalg.norm(r.telemetry[:, [TELEMETRY_FIELDS.index(f"p_{a}") for a in "xyz"]] - [0, 0, 1], axis=1)
        assert drift.max() < 1e-3
        assert len(r.telemetry) == 2501
        assert r.telemetry_csv().splitlines()[0] == ",".join(TELEMETRY_FIELDS)

    def test_shifted_hover_stays_level(self):
        r = run_scenario(hover_template(10.0, l=0.18))
        assert r.ok
        # equal initial rotor speeds give a short start-up dip while the lag settles
        assert np.abs(r.column("pitch")).max() < 0.1
        assert abs(r.column("pitch")[-1]) < 1e-3
        assert abs(r.column("p_x")[-1]) < 1e-3
        assert np.all(r.column("l") == 0.18)

    def test_instability_is_reported(self):
        r = run_scenario(case2_template((1.0,)))
        assert r.status == "unstable" and "omega" in r.reason
        assert r.t_end < r.telemetry[-1, 0] + 0.01

    def test_seeded_noise_is_reproducible(self):
        cfg = hover_template(0.5)
        a = run_scenario(replace(cfg, sim=replace(cfg.sim, position_noise=0.01, seed=3)))
        b = run_scenario(replace(cfg, sim=replace(cfg.sim, position_noise=0.01, seed=3)))
        c = run_scenario(replace(cfg, sim=replace(cfg.sim, position_noise=0.01, seed=4)))
        assert a.telemetry_csv() == b.telemetry_csv() != c.telemetry_csv()
