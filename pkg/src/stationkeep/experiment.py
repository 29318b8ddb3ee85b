"""Experiment orchestration: data collection, learning runs, and reports.

``collect`` drives the craft along a phase-separated excitation with a PD
tracker in still water and distills the recording into a rank-complete
history stack.  ``run`` executes the station-keeping loop: a 50 Hz control
and identification rate with the critic extrapolation evaluated at a slower
cadence, starting from the published initial condition and gain set, with
the value weights initialized from the Riccati oracle of the model
linearized about the station.
"""

from __future__ import annotations

import json
import math
import time

import numpy as np

from . import adp, dynamics, riccati, sim, sysid
from .adp import ActorState, AdpModel, CriticState, QuadraticBasis
from .config import ExperimentConfig
from .dynamics import Current, State, VehicleParams
from .sim import CurrentField, Trajectory
from .sysid import HistoryStack, IdentifierState, RankConditionError, StackEntry

__all__ = [
    "ReferenceSignal",
    "PdTrackingController",
    "StationKeepingController",
    "oracle_weights",
    "collect",
    "build_stack_from_trajectory",
    "run",
    "report_from_trajectory",
]

DIAG_COLUMNS = [
    "zeta_err_norm", "theta_err_norm", "delta", "delta_k_rms", "delta_k_max",
    "gamma_norm", "gamma_min_eig", "lambda_min", "wa_norm", "wc_wa_dist",
    "wc_dist_oracle",
] + [f"theta_hat_{i + 1}" for i in range(dynamics.N_PARAMS)]

# Two-tone excitation per pose axis: (amplitude m or rad, frequency rad/s,
# phase).  The far-apart tone frequencies make each axis visit distinctly
# different speeds, which separates the linear from the quadratic drag.
EXCITATION = (
    ((3.2, 0.12, 0.0), (2.2, 0.62, 0.8)),
    ((2.8, 0.10, 1.3), (1.7, 0.50, 0.0)),
    ((1.0, 0.36, 0.5), (0.6, 0.20, 2.0)),
)
# Each axis is gated by a squared-cosine envelope a third of a cycle out of
# phase with the others, so the axes take turns dominating.  Keeping the
# surge-sway product small bounds the most aggressively adapted Coriolis
# direction and keeps the 50 Hz parameter update comfortably stable, while
# the overlap windows still excite the velocity products it learns from.
ENVELOPE_CYCLE = 70.0


class ReferenceSignal:
    """Smooth phase-separated excitation reference with an analytic rate."""

    def __init__(self, scale: float = 1.0, cycle: float = ENVELOPE_CYCLE):
        self.scale = scale
        self.rate = 2.0 * math.pi / cycle
        self.phases = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)

    def _envelope(self, t: float, axis: int):
        c = 0.5 * (1.0 + math.cos(self.rate * t + self.phases[axis]))
        return c * c, -self.rate * math.sin(self.rate * t + self.phases[axis]) * c

    def pose(self, t: float) -> np.ndarray:
        out = np.zeros(3)
        for axis, terms in enumerate(EXCITATION):
            env, _ = self._envelope(t, axis)
            tone = sum(a * math.sin(w * t + p) for a, w, p in terms)
            out[axis] = self.scale * env * tone
        return out

    def pose_rate(self, t: float) -> np.ndarray:
        out = np.zeros(3)
        for axis, terms in enumerate(EXCITATION):
            env, env_rate = self._envelope(t, axis)
            tone = sum(a * math.sin(w * t + p) for a, w, p in terms)
            tone_rate = sum(a * w * math.cos(w * t + p) for a, w, p in terms)
            out[axis] = self.scale * (env_rate * tone + env * tone_rate)
        return out


class PdTrackingController:
    """Body-frame PD tracker used only to gather exciting data."""

    def __init__(self, reference: ReferenceSignal, kp, kd):
        self.reference = reference
        self.kp = np.asarray(kp, dtype=float)
        self.kd = np.asarray(kd, dtype=float)

    def __call__(self, k: int, t: float, zeta_m: np.ndarray, current_m: Current):
        ref = self.reference.pose(t)
        ref_rate = self.reference.pose_rate(t)
        rot_t = dynamics.rotation_from_yaw(zeta_m[2]).T
        err = np.array([ref[0] - zeta_m[0], ref[1] - zeta_m[1],
                        dynamics.wrap_angle(ref[2] - zeta_m[2])])
        vel_err = rot_t @ ref_rate - zeta_m[3:]
        tau_b = self.kp * (rot_t @ err) + self.kd * vel_err
        return tau_b, {}


def oracle_weights(params: VehicleParams, theta, cost, basis: QuadraticBasis):
    """Riccati solution for the station linearization and its basis weights."""
    model = riccati.linearize(params, theta)
    solution = riccati.solve_are(model, cost.Q, cost.R)
    weights = adp.weights_from_value_matrix(basis, solution.P)
    return solution, weights


class StationKeepingController:
    """Full learning controller: actor-critic policy, current feedforward,
    and the concurrent-learning identifier, advanced at the loop rate with
    the critic extrapolation on a slower cadence."""

    def __init__(self, cfg: ExperimentConfig, params: VehicleParams,
                 field: CurrentField, stack: HistoryStack | None):
        self.params = params
        self.mode = cfg.mode
        self.dt = cfg["sim.dt"]
        self.critic_every = cfg["adp.critic_every"]
        self.basis = QuadraticBasis()
        self.cost = cfg.cost_weights()
        self.g = dynamics.control_effectiveness(params)
        self.theta_true = params.true_theta.as_array()

        if self.mode == "linear-test":
            # The learner's model and the plant coincide and stay exact.
            self.identify = False
            theta0 = self.theta_true.copy()
            theta_for_init = theta0
            self.linear_model = riccati.linearize(params, theta0)
            A = self.linear_model.A
            self.drift = lambda zeta, theta_hat: A @ zeta
        else:
            self.identify = stack is not None and len(stack) > 0
            theta0 = np.zeros(dynamics.N_PARAMS)
            # The value weights start at the Riccati solution of the best
            # model the recorded data supports; the online estimate still
            # starts from zero.  Initializing against the parameter-free
            # model instead makes the learner chase a violently morphing
            # model while the recorded-data update snaps the drag terms in.
            if self.identify:
                S, b = stack.prediction_sums(params)
                theta_for_init = np.linalg.solve(S, b)
            else:
                theta_for_init = theta0
            self.linear_model = None
            if self.mode == "constant-current":
                self.eta_c_dot = field.constant_earth_velocity()
                self.drift = self._constant_current_drift
            else:
                self.drift = self._residual_drift

        self.model = AdpModel(self.basis, self.cost, self.g, self.drift)

        solution, weights = oracle_weights(
            params, theta_for_init, self.cost, self.basis)
        self.riccati_solution = solution
        self.oracle_w = weights
        perturbation = cfg["adp.wc_perturbation"]
        self.critic = CriticState(
            weights=weights * (1.0 + perturbation),
            gain=cfg["adp.gamma0"] * np.eye(self.basis.size),
            k_c1=cfg["adp.k_c1"], k_c2=cfg["adp.k_c2"],
            k_rho=cfg["adp.k_rho"], beta=cfg["adp.beta"],
            gamma_bar=cfg["adp.gamma_bar"])
        self.actor = ActorState(weights=weights * (1.0 + perturbation),
                                k_a=cfg["adp.k_a"], w_bar=cfg["adp.w_bar"])
        self.points = adp.extrapolation_set(cfg["box.half_widths"],
                                            cfg["adp.n_extrapolation"],
                                            seed=cfg.seed)

        self.stack = stack
        self.identifier = IdentifierState(
            zeta_hat=cfg["sim.initial_state"].copy(),
            theta_hat=theta0,
            k_zeta=cfg["sysid.k_zeta"],
            gamma_theta=cfg["sysid.gamma_theta"],
            k_theta=cfg["sysid.k_theta"])

        self._last = {"delta_k_rms": 0.0, "delta_k_max": 0.0, "lambda_min": 0.0,
                      "gamma_norm": adp.gain_norm(self.critic.gain),
                      "gamma_min_eig": float(np.min(np.linalg.eigvalsh(self.critic.gain)))}

    def _residual_drift(self, zeta, theta_hat):
        state = State.from_array(zeta)
        return (dynamics.residual_regressor(state, self.params) @ theta_hat
                + dynamics.residual_drift(state, self.params))

    def _constant_current_drift(self, zeta, theta_hat):
        state = State.from_array(zeta)
        regressor, drift, _ = dynamics.constant_current_model(
            state, self.eta_c_dot, theta_hat, self.params)
        return regressor @ theta_hat + drift

    def feedforward(self, zeta_m: np.ndarray, current_m: Current) -> np.ndarray:
        if self.mode == "linear-test":
            return np.zeros(3)
        state = State.from_array(zeta_m)
        theta_hat = self.identifier.theta_hat
        if self.mode == "constant-current":
            _, _, tau_ss = dynamics.constant_current_model(
                state, self.eta_c_dot, theta_hat, self.params)
            return tau_ss
        return dynamics.current_feedforward(state, current_m, theta_hat, self.params)

    def _critic_batch(self, theta_hat):
        deltas = np.empty(len(self.points))
        omegas = np.empty((len(self.points), self.basis.size))
        rhos = np.empty(len(self.points))
        for i, zeta_k in enumerate(self.points):
            delta_k, omega_k = adp.bellman_error(
                self.model, zeta_k, theta_hat, self.critic.weights, self.actor.weights)
            deltas[i] = delta_k
            omegas[i] = omega_k
            rhos[i] = adp.normalization(self.critic, omega_k)
        return deltas, omegas, rhos

    def __call__(self, k: int, t: float, zeta_m: np.ndarray, current_m: Current):
        theta_hat = self.identifier.theta_hat
        tau_b = adp.policy(self.model, zeta_m, self.actor) \
            + self.feedforward(zeta_m, current_m)

        delta, omega = adp.bellman_error(self.model, zeta_m, theta_hat,
                                         self.critic.weights, self.actor.weights)

        critic_tick = (k % self.critic_every == 0)
        if critic_tick:
            deltas, omegas, rhos = self._critic_batch(theta_hat)
            monitor = np.einsum("ki,kj,k->ij", omegas, omegas, 1.0 / rhos)
            monitor /= len(self.points)
            self._last["lambda_min"] = float(np.min(np.linalg.eigvalsh(monitor)))
            self._last["delta_k_rms"] = float(np.sqrt(np.mean(deltas ** 2)))
            self._last["delta_k_max"] = float(np.max(np.abs(deltas)))

        diag = {
            "zeta_err_norm": float(np.linalg.norm(zeta_m - self.identifier.zeta_hat))
            if self.identify else 0.0,
            "theta_err_norm": float(np.linalg.norm(self.theta_true - theta_hat)),
            "delta": delta,
            "delta_k_rms": self._last["delta_k_rms"],
            "delta_k_max": self._last["delta_k_max"],
            "gamma_norm": self._last["gamma_norm"],
            "gamma_min_eig": self._last["gamma_min_eig"],
            "lambda_min": self._last["lambda_min"],
            "wa_norm": float(np.linalg.norm(self.actor.weights)),
            "wc_wa_dist": float(np.linalg.norm(self.critic.weights - self.actor.weights)),
            "wc_dist_oracle": float(np.linalg.norm(self.critic.weights - self.oracle_w)),
        }
        for i in range(dynamics.N_PARAMS):
            diag[f"theta_hat_{i + 1}"] = float(theta_hat[i])

        if critic_tick:
            rho = adp.normalization(self.critic, omega)
            adp.critic_step(self.critic, (delta, omega, rho),
                            list(zip(deltas, omegas, rhos)),
                            self.critic_every * self.dt)
            self._last["gamma_norm"] = adp.gain_norm(self.critic.gain)
            self._last["gamma_min_eig"] = float(
                np.min(np.linalg.eigvalsh(self.critic.gain)))
        adp.actor_step(self.actor, self.critic.weights, self.dt)

        if self.identify:
            sysid.parameter_step(self.identifier, self.stack, zeta_m, current_m,
                                 tau_b, self.dt, self.params)
            sysid.observer_step(self.identifier, zeta_m, current_m, tau_b,
                                self.dt, self.params)
        return tau_b, diag


def build_stack_from_trajectory(trajectory: Trajectory, params: VehicleParams,
                                capacity: int, dt: float, window: float,
                                stride: int = 5,
                                derivative_source: str = "smoothed",
                                gamma_theta=None, k_theta: float = 0.0,
                                rate_margin: float = 1.8) -> HistoryStack:
    """Distill a recorded trajectory into an excitation-maximizing stack.

    ``derivative_source`` selects how the stored state derivative is
    produced: ``"smoothed"`` fits the recorded state history around each
    sample (the deployable path), ``"exact"`` evaluates the true model at
    the sample (a zero-error stack for verification work).

    When the adaptation gains are given, insertions pushing the fastest
    mode of the discrete parameter update past ``rate_margin / dt`` are
    reverted: excitation maximization otherwise happily hoards the largest
    (for example noise-inflated) regressors until the 50 Hz update turns
    unstable.
    """
    if derivative_source not in ("smoothed", "exact"):
        raise ValueError("derivative_source must be 'smoothed' or 'exact'")
    data = trajectory.as_array()
    times = data[:, 0]
    zetas = data[:, 1:7]
    currents = data[:, 7:9]
    taus = data[:, 9:12]
    half = max(2, int(round(window / (2.0 * dt))))
    stack = HistoryStack(capacity)
    theta_true = params.true_theta.as_array()
    g = dynamics.control_effectiveness(params)
    rate_cap = rate_margin / dt if gamma_theta is not None else None

    for idx in range(half, len(times) - half, stride):
        zeta = zetas[idx]
        nu_c = np.array([currents[idx, 0], currents[idx, 1], 0.0])
        nu_c_dot = np.zeros(3)
        current = Current(nu_c, nu_c_dot)
        state = State.from_array(zeta)
        regressor = dynamics.regressor_full(state, current, params)
        if derivative_source == "smoothed":
            window_slice = slice(idx - half, idx + half + 1)
            zeta_dot, deriv_err = sysid.smooth_derivative(
                times[window_slice], zetas[window_slice])
        else:
            zeta_dot = (regressor @ theta_true
                        + dynamics.drift_known(state, nu_c_dot, params)
                        + g @ taus[idx])
            deriv_err = 0.0
        entry = StackEntry(times[idx], zeta.copy(), nu_c, nu_c_dot,
                           taus[idx].copy(), zeta_dot, regressor, deriv_err)
        if rate_cap is None:
            stack.insert(entry)
            continue
        snapshot = list(stack.entries)
        if stack.insert(entry) and \
                stack.update_rate_bound(gamma_theta, k_theta) > rate_cap:
            stack.entries = snapshot
            stack._sums = None
    return stack


def collect(cfg: ExperimentConfig, derivative_source: str = "smoothed"):
    """Run the excitation experiment and build the history stack.

    Returns ``(stack, trajectory)``; raises ``RankConditionError`` when the
    collected data cannot complete the rank condition (for example with a
    zero-amplitude reference).
    """
    params = cfg.vehicle_params()
    reference = ReferenceSignal(scale=cfg["collect.excitation_scale"])
    controller = PdTrackingController(reference, cfg["collect.kp"], cfg["collect.kd"])
    sim_cfg = cfg.sim_config(duration=cfg["collect.duration"],
                             initial_state=np.zeros(6))
    field = CurrentField(mode="none")
    trajectory = sim.run(sim_cfg, params, field, controller)
    stack = build_stack_from_trajectory(
        trajectory, params, cfg["sysid.stack_size"], sim_cfg.dt,
        cfg["sysid.smoothing_window"], cfg["collect.candidate_stride"],
        derivative_source)
    ok, y_min = sysid.rank_condition(stack)
    if not ok:
        raise RankConditionError(
            f"collected stack fails the rank condition (y_min={y_min:.3e}); "
            "increase the excitation amplitude or duration", y_min)
    return stack, trajectory


def run(cfg: ExperimentConfig, stack: HistoryStack | None):
    """Execute the station-keeping experiment.

    Returns ``(trajectory, controller, wall_clock_seconds)``.  The stack is
    required outside the linear test mode; it must satisfy the rank
    condition.
    """
    params = cfg.vehicle_params()
    field = cfg.current_field()
    if cfg.mode != "linear-test":
        if stack is None or len(stack) == 0:
            raise ValueError("station-keeping run requires a history stack")
        ok, y_min = sysid.rank_condition(stack)
        if not ok:
            raise RankConditionError("history stack fails the rank condition", y_min)
    controller = StationKeepingController(cfg, params, field, stack)
    rhs = None
    if cfg.mode == "linear-test":
        rhs = sim.linear_rhs(controller.linear_model.A, controller.linear_model.B)
    start = time.perf_counter()
    trajectory = sim.run(cfg.sim_config(), params, field, controller, rhs=rhs)
    wall = time.perf_counter() - start
    return trajectory, controller, wall


def _settling_time(t: np.ndarray, satisfied: np.ndarray):
    """Earliest time after which the criterion holds to the end."""
    if not satisfied[-1]:
        return None
    bad = np.nonzero(~satisfied)[0]
    return float(t[0]) if bad.size == 0 else float(t[bad[-1] + 1])


def report_from_trajectory(trajectory: Trajectory, wall_clock: float,
                           xy_threshold: float = 0.5,
                           psi_threshold: float = 0.1) -> dict:
    """Summary metrics recomputed purely from the persisted columns."""
    t = trajectory.column("t")
    x, y = trajectory.column("x"), trajectory.column("y")
    psi = trajectory.column("psi")
    xy_norm = np.hypot(x, y)
    eta_norm = np.sqrt(x ** 2 + y ** 2 + psi ** 2)
    report = {
        "n_steps": len(t),
        "duration": float(t[-1]) + float(t[1] - t[0]) if len(t) > 1 else 0.0,
        "final_eta_norm": float(eta_norm[-1]),
        "final_xy_norm": float(xy_norm[-1]),
        "final_psi_abs": float(abs(psi[-1])),
        "final_theta_err_norm": float(trajectory.column("theta_err_norm")[-1]),
        "time_to_xy_threshold": _settling_time(t, xy_norm <= xy_threshold),
        "time_to_psi_threshold": _settling_time(t, np.abs(psi) <= psi_threshold),
        "min_lambda_min": float(np.min(trajectory.column("lambda_min"))),
        "max_abs_delta": float(np.max(np.abs(trajectory.column("delta")))),
        "max_delta_k_max": float(np.max(trajectory.column("delta_k_max"))),
        "max_gamma_norm": float(np.max(trajectory.column("gamma_norm"))),
        "min_gamma_eig": float(np.min(trajectory.column("gamma_min_eig"))),
        "max_wa_norm": float(np.max(trajectory.column("wa_norm"))),
        "wall_clock_s": wall_clock,
    }
    return report


def write_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
