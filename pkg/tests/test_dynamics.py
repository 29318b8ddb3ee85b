"""Unit tests for the planar craft model and its decompositions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stationkeep import dynamics as dyn
from stationkeep.dynamics import (BodyVelocity, Current, ParameterVector,
                                  Pose, State, VehicleParams)

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


def make_params(theta=None, m=40.8, Iz=7.5, ma=(5.0, 15.0, 3.0)):
    if theta is None:
        theta = ParameterVector(-15.0, -5.0, 25.0, 45.0, 4.0, 35.0, 60.0, 2.0)
    elif not isinstance(theta, ParameterVector):
        theta = ParameterVector.from_array(np.asarray(theta, dtype=float))
    return VehicleParams(m=m, Iz=Iz, Ma_diag=np.array(ma), true_theta=theta)


def random_state(rng):
    return State.from_array(rng.uniform(-1.0, 1.0, 6) * [5, 5, 3, 1, 1, 1])


def random_current(rng, scale=0.3):
    nu_c = rng.uniform(-scale, scale, 3)
    nu_c[2] = 0.0
    nu_c_dot = rng.uniform(-scale, scale, 3)
    nu_c_dot[2] = 0.0
    return Current(nu_c, nu_c_dot)


def direct_state_derivative(state, current, tau_b, params):
    """Equation-of-motion oracle: solve the force balance directly."""
    theta = params.true_theta.as_array()
    nu = state.vel.as_array()
    nu_r = nu - current.nu_c
    vel_r = BodyVelocity(*nu_r)
    force = (np.asarray(tau_b, dtype=float)
             + params.M_A @ current.nu_c_dot
             - dyn.coriolis_rb(state.vel, params) @ nu
             - dyn.coriolis_a(vel_r, theta) @ nu_r
             - dyn.damping(vel_r, theta) @ nu_r)
    nu_dot = np.linalg.solve(params.M, force)
    eta_dot = dyn.rotation(state.pose) @ nu
    return np.concatenate([eta_dot, nu_dot])


class TestRotation:
    def test_identity_at_zero(self):
        assert np.allclose(dyn.rotation(Pose(0, 0, 0.0)), np.eye(3))

    def test_quarter_turn(self):
        R = dyn.rotation(Pose(0, 0, math.pi / 2))
        expected = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
        assert np.allclose(R, expected, atol=1e-15)

    def test_eighth_turn_matches_planar_rotation(self):
        # Oracle: rotate the unit x vector by 45 degrees in 2-D.
        R = dyn.rotation(Pose(0, 0, math.pi / 4))
        v = R[:2, :2] @ np.array([1.0, 0.0])
        assert np.allclose(v, [math.cos(math.pi / 4), math.sin(math.pi / 4)])
        assert abs(R[0, 0] - 0.7071067811865476) < 1e-15

    @given(psi=st.floats(min_value=-50.0, max_value=50.0, allow_nan=False))
    def test_orthogonal_unit_determinant(self, psi):
        R = dyn.rotation(Pose(0, 0, psi))
        assert np.linalg.norm(R.T @ R - np.eye(3)) <= 1e-12
        assert abs(np.linalg.det(R) - 1.0) <= 1e-12

    def test_orthogonality_large_sample(self):
        # Vectorized sweep over a million yaw angles.
        rng = np.random.default_rng(7)
        psi = rng.uniform(-math.pi, math.pi, 1_000_000)
        c, s = np.cos(psi), np.sin(psi)
        # R^T R - I has entries c^2 + s^2 - 1 and zeros for this structure.
        assert np.max(np.abs(c * c + s * s - 1.0)) <= 1e-12
        # Spot-check the function itself on a subsample.
        for p in psi[::100_000]:
            R = dyn.rotation(Pose(0, 0, float(p)))
            assert np.linalg.norm(R.T @ R - np.eye(3)) <= 1e-12


class TestCoriolisAndDamping:
    def test_coriolis_rb_zero_velocity(self):
        params = make_params()
        assert np.allclose(dyn.coriolis_rb(BodyVelocity(0, 0, 0), params), 0.0)

    def test_coriolis_rb_formula(self):
        params = make_params(m=40.8)
        C = dyn.coriolis_rb(BodyVelocity(1.0, 0.0, 0.0), params)
        expected = np.zeros((3, 3))
        expected[1, 2] = 40.8
        expected[2, 1] = -40.8
        assert np.allclose(C, expected)

    @given(u=finite, v=finite, r=finite)
    @settings(max_examples=50)
    def test_coriolis_rb_skew_passivity(self, u, v, r):
        params = make_params()
        nu = np.array([u, v, r])
        C = dyn.coriolis_rb(BodyVelocity(u, v, r), params)
        assert abs(nu @ C @ nu) <= 1e-9 * max(1.0, np.linalg.norm(nu) ** 3)

    def test_coriolis_a_zero_cases(self):
        theta = ParameterVector(2.0, 3.0, 1, 1, 1, 1, 1, 1)
        assert np.allclose(dyn.coriolis_a(BodyVelocity(0, 0, 0), theta), 0.0)
        zero_ca = ParameterVector(0.0, 0.0, 1, 1, 1, 1, 1, 1)
        assert np.allclose(dyn.coriolis_a(BodyVelocity(0.4, -0.2, 0.9), zero_ca), 0.0)

    def test_coriolis_a_formula(self):
        theta = ParameterVector(2.0, 3.0, 0, 0, 0, 0, 0, 0)
        C = dyn.coriolis_a(BodyVelocity(1.0, 1.0, 0.0), theta)
        assert C[0, 2] == 2.0
        assert C[1, 2] == -3.0
        assert C[2, 0] == -2.0
        assert C[2, 1] == 3.0
        assert np.count_nonzero(C) == 4

    @given(u=finite, v=finite, r=finite, ca1=finite, ca2=finite)
    @settings(max_examples=50)
    def test_coriolis_a_skew_passivity(self, u, v, r, ca1, ca2):
        theta = ParameterVector(ca1, ca2, 0, 0, 0, 0, 0, 0)
        nu_r = np.array([u, v, r])
        C = dyn.coriolis_a(BodyVelocity(u, v, r), theta)
        assert abs(nu_r @ C @ nu_r) <= 1e-8 * max(1.0, np.linalg.norm(nu_r) ** 3)

    def test_damping_linear_only(self):
        theta = ParameterVector(0, 0, 1.0, 2.0, 3.0, 0, 0, 0)
        D = dyn.damping(BodyVelocity(0, 0, 0), theta)
        assert np.allclose(D, np.diag([1.0, 2.0, 3.0]))

    def test_damping_zero_theta(self):
        assert np.allclose(dyn.damping(BodyVelocity(1, 2, 3), ParameterVector.zero()), 0.0)

    def test_damping_quadratic_term(self):
        theta = ParameterVector(0, 0, 1.0, 0, 0, 0.5, 0, 0)
        D = dyn.damping(BodyVelocity(2.0, 0, 0), theta)
        assert D[0, 0] == pytest.approx(2.0)

    def test_damping_opposes_relative_flow(self):
        theta = ParameterVector(0, 0, 1.0, 2.0, 3.0, 0.5, 0.5, 0.5)
        nu_r = np.array([0.4, -0.3, 0.2])
        force = -dyn.damping(BodyVelocity(*nu_r), theta) @ nu_r
        assert force @ nu_r < 0.0


class TestRegressorAndDrift:
    def test_regressor_zero_relative_velocity(self):
        params = make_params()
        rng = np.random.default_rng(0)
        nu = rng.uniform(-0.5, 0.5, 3)
        nu[2] = 0.0  # matching an irrotational current needs zero yaw rate
        state = State.from_array(np.concatenate([[1.0, -2.0, 0.3], nu]))
        current = Current(nu.copy(), np.zeros(3))
        assert np.allclose(dyn.regressor_full(state, current, params), 0.0)

    def test_regressor_linear_in_theta(self):
        params = make_params()
        rng = np.random.default_rng(1)
        state = random_state(rng)
        current = random_current(rng)
        Y = dyn.regressor_full(state, current, params)
        t1, t2 = rng.normal(size=8), rng.normal(size=8)
        a, b = 1.7, -0.4
        assert np.allclose(Y @ (a * t1 + b * t2), a * (Y @ t1) + b * (Y @ t2),
                           atol=1e-14)

    def test_regressor_matches_brute_force(self):
        params = make_params()
        rng = np.random.default_rng(2)
        for _ in range(200):
            state = random_state(rng)
            current = random_current(rng)
            theta = rng.normal(scale=20.0, size=8)
            nu_r = state.vel.as_array() - current.nu_c
            vel_r = BodyVelocity(*nu_r)
            brute = -np.linalg.solve(
                params.M,
                dyn.coriolis_a(vel_r, theta) @ nu_r + dyn.damping(vel_r, theta) @ nu_r)
            Y = dyn.regressor_full(state, current, params)
            assert np.allclose(Y[:3] @ theta, 0.0)
            assert np.max(np.abs(Y[3:] @ theta - brute)) <= 1e-12

    def test_drift_known_zero_state(self):
        params = make_params()
        state = State.from_array(np.zeros(6))
        assert np.allclose(dyn.drift_known(state, np.zeros(3), params), 0.0)

    def test_drift_known_kinematics_row(self):
        params = make_params()
        state = State.from_array([0, 0, 0, 1.0, 0, 0])
        f0 = dyn.drift_known(state, np.zeros(3), params)
        assert np.allclose(f0[:3], [1.0, 0.0, 0.0])

    def test_drift_known_term_by_term(self):
        params = make_params()
        rng = np.random.default_rng(3)
        for _ in range(50):
            state = random_state(rng)
            accel = rng.uniform(-0.2, 0.2, 3)
            nu = state.vel.as_array()
            expected = np.concatenate([
                dyn.rotation(state.pose) @ nu,
                np.linalg.solve(params.M,
                                params.M_A @ accel
                                - dyn.coriolis_rb(state.vel, params) @ nu)])
            got = dyn.drift_known(state, accel, params)
            assert np.max(np.abs(got - expected)) <= 1e-12

    def test_control_effectiveness_identity_mass(self):
        params = make_params(m=0.5, Iz=0.5, ma=(0.5, 0.5, 0.5))
        g = dyn.control_effectiveness(params)
        assert np.allclose(g[:3], 0.0)
        assert np.allclose(g[3:], np.eye(3))

    def test_control_effectiveness_diagonal(self):
        params = make_params(m=1.0, Iz=1.0, ma=(1.0, 1.0, 1.0))
        g = dyn.control_effectiveness(params)
        assert np.allclose(g[3:], np.diag([0.5, 0.5, 0.5]))

    def test_control_effectiveness_multiply_back(self):
        params = make_params()
        g = dyn.control_effectiveness(params)
        assert np.max(np.abs(g[3:] @ params.M - np.eye(3))) <= 1e-12

    def test_decomposition_exactness(self):
        params = make_params()
        rng = np.random.default_rng(4)
        worst = 0.0
        for _ in range(500):
            state = random_state(rng)
            current = random_current(rng)
            tau = rng.uniform(-20, 20, 3)
            lhs = (dyn.regressor_full(state, current, params)
                   @ params.true_theta.as_array()
                   + dyn.drift_known(state, current.nu_c_dot, params)
                   + dyn.control_effectiveness(params) @ tau)
            rhs = direct_state_derivative(state, current, tau, params)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        assert worst <= 1e-10


class TestResidualModel:
    def test_zero_state(self):
        params = make_params()
        state = State.from_array(np.zeros(6))
        assert np.allclose(dyn.residual_regressor(state, params), 0.0)
        assert np.allclose(dyn.residual_drift(state, params), 0.0)

    def test_matches_full_model_without_current(self):
        params = make_params()
        rng = np.random.default_rng(5)
        for _ in range(50):
            state = random_state(rng)
            assert np.allclose(
                dyn.residual_regressor(state, params),
                dyn.regressor_full(state, Current.zero(), params))
            assert np.allclose(
                dyn.residual_drift(state, params),
                dyn.drift_known(state, np.zeros(3), params))

    def test_residual_drift_equals_full_drift_at_zero_current(self):
        params = make_params()
        theta = params.true_theta.as_array()
        rng = np.random.default_rng(6)
        for _ in range(50):
            state = random_state(rng)
            residual = (dyn.residual_regressor(state, params) @ theta
                        + dyn.residual_drift(state, params))
            full = (dyn.regressor_full(state, Current.zero(), params) @ theta
                    + dyn.drift_known(state, np.zeros(3), params))
            assert np.max(np.abs(residual - full)) <= 1e-12


class TestCurrentFeedforward:
    def test_zero_current_gives_zero(self):
        params = make_params()
        rng = np.random.default_rng(7)
        state = random_state(rng)
        theta_hat = rng.normal(size=8)
        ff = dyn.current_feedforward(state, Current.zero(), theta_hat, params)
        assert np.allclose(ff, 0.0)

    def test_added_mass_term(self):
        params = make_params(ma=(5.0, 5.0, 5.0))
        state = State.from_array(np.zeros(6))
        current = Current(np.zeros(3), np.array([1.0, 0.0, 0.0]))
        ff = dyn.current_feedforward(state, current, np.zeros(8), params)
        assert np.allclose(ff, [-5.0, 0.0, 0.0])

    def test_linear_in_theta(self):
        params = make_params()
        rng = np.random.default_rng(8)
        state = random_state(rng)
        current = random_current(rng)
        t1, t2 = rng.normal(size=8), rng.normal(size=8)
        ff = lambda th: dyn.current_feedforward(state, current, th, params)
        base = ff(np.zeros(8))
        assert np.allclose(ff(2.0 * t1 + 3.0 * t2) - base,
                           2.0 * (ff(t1) - base) + 3.0 * (ff(t2) - base),
                           atol=1e-12)

    def test_feedforward_reproduces_full_model(self):
        # With exact parameters the residual model driven by the virtual
        # control (applied force minus feedforward) matches the true plant.
        params = make_params()
        theta = params.true_theta.as_array()
        g = dyn.control_effectiveness(params)
        rng = np.random.default_rng(9)
        for _ in range(100):
            state = random_state(rng)
            current = random_current(rng)
            tau_b = rng.uniform(-20, 20, 3)
            tau_c = dyn.current_feedforward(state, current, theta, params)
            u = tau_b - tau_c
            residual_flow = (dyn.residual_regressor(state, params) @ theta
                             + dyn.residual_drift(state, params) + g @ u)
            full_flow = (dyn.regressor_full(state, current, params) @ theta
                         + dyn.drift_known(state, current.nu_c_dot, params)
                         + g @ tau_b)
            assert np.max(np.abs(residual_flow - full_flow)) <= 1e-10


class TestConstantCurrentModel:
    def test_no_current_reduces_to_residual(self):
        params = make_params()
        theta = params.true_theta.as_array()
        rng = np.random.default_rng(10)
        state = random_state(rng)
        regressor, drift, tau_ss = dyn.constant_current_model(
            state, np.zeros(2), theta, params)
        assert np.allclose(regressor, dyn.residual_regressor(state, params))
        assert np.allclose(drift, dyn.residual_drift(state, params))
        assert np.allclose(tau_ss, 0.0)

    def test_frame_alignment(self):
        current = dyn.body_current_from_earth(0.0, 0.0, np.array([1.0, 0.0]))
        assert np.allclose(current.nu_c, [1.0, 0.0, 0.0])
        assert np.allclose(current.nu_c_dot, 0.0)

    def test_body_current_rotation(self):
        # Earth flow along +x seen from a craft heading +y is pure sway.
        current = dyn.body_current_from_earth(math.pi / 2, 0.0, np.array([1.0, 0.0]))
        assert np.allclose(current.nu_c, [0.0, -1.0, 0.0], atol=1e-15)

    def test_body_current_rate_matches_finite_difference(self):
        eta_c_dot = np.array([0.3, -0.2])
        r = 0.4
        psi = 0.7
        h = 1e-6
        plus = dyn.body_current_from_earth(psi + r * h, r, eta_c_dot).nu_c
        minus = dyn.body_current_from_earth(psi - r * h, r, eta_c_dot).nu_c
        fd = (plus - minus) / (2 * h)
        got = dyn.body_current_from_earth(psi, r, eta_c_dot).nu_c_dot
        assert np.max(np.abs(fd - got)) <= 1e-8

    def test_station_equilibrium(self):
        # At the station with exact parameters, the steady feedforward holds
        # the craft perfectly still in a constant earth-fixed current.
        params = make_params()
        theta = params.true_theta.as_array()
        eta_c_dot = np.array([0.12, -0.09])
        state = State.from_array(np.zeros(6))
        regressor, drift, tau_ss = dyn.constant_current_model(
            state, eta_c_dot, theta, params)
        current = dyn.body_current_from_earth(0.0, 0.0, eta_c_dot)
        g = dyn.control_effectiveness(params)
        zeta_dot = (dyn.regressor_full(state, current, params) @ theta
                    + dyn.drift_known(state, current.nu_c_dot, params)
                    + g @ tau_ss)
        assert np.max(np.abs(zeta_dot)) <= 1e-10
        # The redefined residual drift also vanishes at the station, so the
        # virtual control (applied force minus feedforward) is zero there.
        assert np.max(np.abs(regressor @ theta + drift)) <= 1e-10

    def test_decomposition_matches_plant_off_station(self):
        params = make_params()
        theta = params.true_theta.as_array()
        g = dyn.control_effectiveness(params)
        eta_c_dot = np.array([0.2, 0.1])
        rng = np.random.default_rng(11)
        for _ in range(50):
            state = random_state(rng)
            tau_b = rng.uniform(-10, 10, 3)
            regressor, drift, tau_ss = dyn.constant_current_model(
                state, eta_c_dot, theta, params)
            u = tau_b - tau_ss
            lhs = regressor @ theta + drift + g @ u
            current = dyn.body_current_from_earth(state.pose.psi, state.vel.r,
                                                  eta_c_dot)
            rhs = direct_state_derivative(state, current, tau_b, params)
            assert np.max(np.abs(lhs - rhs)) <= 1e-10


class TestDomainTypes:
    def test_pose_wraps_yaw(self):
        assert Pose(0, 0, 3 * math.pi).psi == pytest.approx(math.pi)
        assert Pose(0, 0, -math.pi).psi == pytest.approx(math.pi)

    def test_current_requires_irrotational(self):
        with pytest.raises(ValueError):
            Current(np.array([0.1, 0.0, 0.2]), np.zeros(3))

    def test_parameter_vector_dimension(self):
        with pytest.raises(ValueError):
            ParameterVector.from_array(np.zeros(7))
        theta = ParameterVector.from_array(np.arange(8.0))
        assert np.allclose(theta.as_array(), np.arange(8.0))

    def test_vehicle_params_validation(self):
        with pytest.raises(ValueError):
            make_params(m=-1.0)
        with pytest.raises(ValueError):
            make_params(ma=(-1.0, 0.0, 0.0))

    def test_state_round_trip(self):
        zeta = np.array([1.0, -2.0, 0.5, 0.1, 0.2, -0.3])
        assert np.allclose(State.from_array(zeta).as_array(), zeta)
