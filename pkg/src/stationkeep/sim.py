"""Deterministic fixed-step simulation of the true craft under a current.

The plant integrates the full nonlinear model with classical 4th-order
Runge-Kutta at the control period while the applied force is held over the
step.  Timestamps are generated from the integer step index so a trajectory
never accumulates floating-point drift, and every stochastic element is
drawn from a seeded generator, so identical configurations reproduce
byte-identical output files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .dynamics import Current, Pose, State, VehicleParams

__all__ = [
    "IntegrationError",
    "CurrentField",
    "NoiseConfig",
    "SimConfig",
    "Trajectory",
    "current_at",
    "rk4_step",
    "plant_rhs",
    "linear_rhs",
    "step",
    "measure",
    "run",
]


class IntegrationError(RuntimeError):
    """Raised when the plant state stops being finite."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


@dataclass(eq=False)
class CurrentField:
    """Ambient water flow: a fixed earth direction whose speed may oscillate.

    ``mode`` is one of ``"time-varying"``, ``"constant"``, or ``"none"``.
    The earth-frame velocity is ``direction * (base_speed + osc_amplitude *
    sin(2 pi t / period))``; constant mode drops the oscillation and none
    zeroes the flow entirely.
    """

    mode: str = "time-varying"
    direction: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    base_speed: float = 0.0
    osc_amplitude: float = 0.0
    period: float = 20.0

    def __post_init__(self):
        if self.mode not in ("time-varying", "constant", "none"):
            raise ValueError(f"unknown current mode {self.mode!r}")
        self.direction = np.asarray(self.direction, dtype=float)
        if self.direction.shape != (2,):
            raise ValueError("current direction must be a planar 2-vector")
        norm = np.linalg.norm(self.direction)
        if norm > 0.0:
            self.direction = self.direction / norm
        if self.base_speed < 0.0 or self.osc_amplitude < 0.0 or self.period <= 0.0:
            raise ValueError("current speeds must be >= 0 and period > 0")
        if self.mode == "none" and (self.base_speed or self.osc_amplitude):
            raise ValueError("mode 'none' requires zero current speeds")

    def earth_velocity(self, t: float) -> np.ndarray:
        if self.mode == "none":
            return np.zeros(2)
        speed = self.base_speed
        if self.mode == "time-varying":
            speed = speed + self.osc_amplitude * math.sin(2.0 * math.pi * t / self.period)
        return self.direction * speed

    def earth_acceleration(self, t: float) -> np.ndarray:
        if self.mode != "time-varying":
            return np.zeros(2)
        rate = 2.0 * math.pi / self.period
        return self.direction * (self.osc_amplitude * rate
                                 * math.cos(2.0 * math.pi * t / self.period))

    def constant_earth_velocity(self) -> np.ndarray:
        """Earth-frame flow for the constant-current decomposition."""
        if self.mode != "constant":
            raise ValueError("constant earth velocity requires mode 'constant'")
        return self.direction * self.base_speed


def current_at(field_: CurrentField, t: float, pose: Pose, r: float) -> Current:
    """Body-frame current and its body-frame rate at time ``t``.

    The rate combines the explicit speed variation with the frame-rotation
    term proportional to the yaw rate.
    """
    c, s = math.cos(pose.psi), math.sin(pose.psi)
    ev = field_.earth_velocity(t)
    ea = field_.earth_acceleration(t)
    uc = c * ev[0] + s * ev[1]
    vc = -s * ev[0] + c * ev[1]
    duc = c * ea[0] + s * ea[1] + r * vc
    dvc = -s * ea[0] + c * ea[1] - r * uc
    return Current(np.array([uc, vc, 0.0]), np.array([duc, dvc, 0.0]))


def rk4_step(rhs, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of ``y' = rhs(t, y)``."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def plant_rhs(params: VehicleParams, field_: CurrentField):
    """State derivative of the true nonlinear plant, ``f(t, zeta, tau_b)``."""
    theta = params.true_theta.as_array()

    def rhs(t: float, zeta: np.ndarray, tau_b: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(zeta)):
            raise IntegrationError("plant state became non-finite")
        state = State.from_array(zeta)
        current = current_at(field_, t, state.pose, state.vel.r)
        return (dynamics.regressor_full(state, current, params) @ theta
                + dynamics.drift_known(state, current.nu_c_dot, params)
                + dynamics.control_effectiveness(params) @ tau_b)

    return rhs


def linear_rhs(A: np.ndarray, B: np.ndarray):
    """State derivative of a linear test plant, ``f(t, zeta, tau_b)``."""
    def rhs(t: float, zeta: np.ndarray, tau_b: np.ndarray) -> np.ndarray:
        return A @ zeta + B @ tau_b

    return rhs


def step(state: State, tau_b, field_: CurrentField, t: float, dt: float,
         params: VehicleParams) -> State:
    """Advance the true plant one step with the force held constant."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    tau_b = np.asarray(tau_b, dtype=float)
    if not np.all(np.isfinite(tau_b)):
        raise IntegrationError("applied force is non-finite")
    rhs = plant_rhs(params, field_)
    try:
        zeta = rk4_step(lambda tt, yy: rhs(tt, yy, tau_b), t, state.as_array(), dt)
    except ValueError as exc:
        raise IntegrationError(f"integration failed: {exc}") from exc
    if not np.all(np.isfinite(zeta)):
        raise IntegrationError("plant state became non-finite")
    return State.from_array(zeta)


@dataclass(eq=False)
class NoiseConfig:
    """Standard deviations of the additive measurement noise (default off)."""

    pose_std: float = 0.0
    vel_std: float = 0.0
    current_std: float = 0.0

    def __post_init__(self):
        if min(self.pose_std, self.vel_std, self.current_std) < 0.0:
            raise ValueError("noise levels must be nonnegative")

    @property
    def enabled(self) -> bool:
        return bool(self.pose_std or self.vel_std or self.current_std)


def measure(zeta: np.ndarray, current: Current, noise: NoiseConfig,
            rng: np.random.Generator):
    """Measured state and current: truth plus seeded Gaussian noise.

    The draw count per call is fixed so the random stream stays aligned
    regardless of which noise levels are active; the yaw component of the
    current stays exactly zero.
    """
    draws = rng.standard_normal(10)
    zeta_m = zeta.copy()
    zeta_m[:3] += noise.pose_std * draws[:3]
    zeta_m[3:] += noise.vel_std * draws[3:6]
    nu_c = current.nu_c.copy()
    nu_c_dot = current.nu_c_dot.copy()
    nu_c[:2] += noise.current_std * draws[6:8]
    nu_c_dot[:2] += noise.current_std * draws[8:10]
    return zeta_m, Current(nu_c, nu_c_dot)


@dataclass(eq=False)
class SimConfig:
    """Fixed-step loop configuration."""

    dt: float = 0.02
    duration: float = 150.0
    seed: int = 0
    initial_state: np.ndarray = field(
        default_factory=lambda: np.array([4.0, 4.0, math.pi / 4.0, 0.0, 0.0, 0.0]))
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.duration < self.dt:
            raise ValueError("duration must cover at least one step")
        self.initial_state = np.asarray(self.initial_state, dtype=float)
        if self.initial_state.shape != (6,):
            raise ValueError("initial state must have 6 components")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


CORE_COLUMNS = ["t", "x", "y", "psi", "u", "v", "r", "uc", "vc",
                "tau1", "tau2", "tau3"]


class Trajectory:
    """Uniformly sampled record of a run; persists as CSV.

    Core columns are the time, measured state, planar current, and applied
    force; any per-step diagnostics appear as additional named columns.
    """

    def __init__(self, diag_names: list[str]):
        self.diag_names = list(diag_names)
        self.rows: list[np.ndarray] = []

    def append(self, t, zeta, current: Current, tau_b, diag) -> None:
        row = np.concatenate([[t], zeta, current.nu_c[:2], tau_b, diag])
        self.rows.append(row)

    @property
    def columns(self) -> list[str]:
        return CORE_COLUMNS + self.diag_names

    def as_array(self) -> np.ndarray:
        return np.vstack(self.rows)

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, self.columns.index(name)]

    def to_csv(self, path) -> None:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(f"{x:.17g}" for x in row))
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().strip().split(",")
            if header[:len(CORE_COLUMNS)] != CORE_COLUMNS:
                raise ValueError(f"unexpected trajectory header in {path}")
            traj = cls(header[len(CORE_COLUMNS):])
            for line in f:
                line = line.strip()
                if line:
                    traj.rows.append(np.array([float(x) for x in line.split(",")]))
        return traj


def run(config: SimConfig, params: VehicleParams, field_: CurrentField,
        controller, rhs=None) -> Trajectory:
    """Drive the plant with a controller callback and record the trajectory.

    The callback receives ``(k, t, zeta_measured, current_measured)`` and
    returns the applied force along with a dict of diagnostic values; the
    diagnostic keys of the first step fix the extra columns.  ``rhs`` may
    replace the nonlinear plant (used by the linear test mode).  Integration
    failures carry the step index.
    """
    if rhs is None:
        rhs = plant_rhs(params, field_)
    rng = np.random.default_rng(config.seed)
    zeta = config.initial_state.copy()
    trajectory = None

    for k in range(config.n_steps):
        t = k * config.dt
        state = State.from_array(zeta)
        current = current_at(field_, t, state.pose, state.vel.r)
        zeta_m, current_m = measure(zeta, current, config.noise, rng)
        tau_b, diag = controller(k, t, zeta_m, current_m)
        tau_b = np.asarray(tau_b, dtype=float)
        if not np.all(np.isfinite(tau_b)):
            raise IntegrationError(f"controller force non-finite at step {k + 1}",
                                   step_index=k + 1)
        if trajectory is None:
            trajectory = Trajectory(list(diag.keys()))
        trajectory.append(t, zeta_m, current_m, tau_b,
                          np.array([diag[name] for name in trajectory.diag_names]))
        try:
            zeta = rk4_step(lambda tt, yy: rhs(tt, yy, tau_b), t, zeta, config.dt)
        except (IntegrationError, ValueError) as exc:
            raise IntegrationError(f"integration failed at step {k + 1}: {exc}",
                                   step_index=k + 1) from exc
        # Wrapping yaw at step boundaries leaves the vector field unchanged.
        zeta[2] = dynamics.wrap_angle(zeta[2])
        if not np.all(np.isfinite(zeta)):
            raise IntegrationError(f"plant state became non-finite at step {k + 1}",
                                   step_index=k + 1)
    return trajectory
