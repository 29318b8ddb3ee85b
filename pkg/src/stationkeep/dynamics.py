"""Planar (3-DOF) marine-craft rigid-body and hydrodynamic model.

Conventions
-----------
State ordering is ``zeta = [x, y, psi, u, v, r]``: earth-fixed position and
yaw followed by body-fixed surge, sway, and yaw-rate.  The craft has its
center of gravity at the body origin, a diagonal rigid-body inertia
``diag(m, m, Iz)``, a known diagonal added-mass matrix, and is neutrally
buoyant, so the restoring term vanishes in the plane.

The unknown hydrodynamics (Coriolis contributions of the added mass plus
linear and quadratic drag) are linear in an 8-parameter vector

    theta = [ca1, ca2, xu, yv, nr, xuu, yvv, nrr]

where ``ca1``/``ca2`` act through the sway/surge relative velocities in the
added-mass Coriolis matrix and the remaining six are diagonal drag
coefficients (drag force opposes the relative flow when they are positive).

Every function here is a pure function of its arguments and safe to call
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

N_PARAMS = 8
STATE_DIM = 6

__all__ = [
    "N_PARAMS",
    "STATE_DIM",
    "Pose",
    "BodyVelocity",
    "State",
    "Current",
    "ParameterVector",
    "VehicleParams",
    "wrap_angle",
    "rotation",
    "rotation_from_yaw",
    "coriolis_rb",
    "coriolis_a",
    "damping",
    "hydro_regressor",
    "regressor_full",
    "drift_known",
    "control_effectiveness",
    "residual_regressor",
    "residual_drift",
    "current_feedforward",
    "body_current_from_earth",
    "constant_current_model",
]


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose:
    """Earth-fixed position (m) and yaw (rad); yaw wrapped to (-pi, pi]."""

    x: float
    y: float
    psi: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.psi)):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi])


@dataclass(frozen=True)
class BodyVelocity:
    """Body-fixed surge/sway velocity (m/s) and yaw rate (rad/s)."""

    u: float
    v: float
    r: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v) and math.isfinite(self.r)):
            raise ValueError("velocity components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.r])


@dataclass(frozen=True)
class State:
    """Full 6-dimensional craft state (pose stacked over body velocity)."""

    pose: Pose
    vel: BodyVelocity

    @classmethod
    def from_array(cls, zeta) -> "State":
        zeta = np.asarray(zeta, dtype=float)
        if zeta.shape != (STATE_DIM,):
            raise ValueError(f"state vector must have shape ({STATE_DIM},), got {zeta.shape}")
        return cls(Pose(zeta[0], zeta[1], zeta[2]), BodyVelocity(zeta[3], zeta[4], zeta[5]))

    def as_array(self) -> np.ndarray:
        p, w = self.pose, self.vel
        return np.array([p.x, p.y, p.psi, w.u, w.v, w.r])


@dataclass(frozen=True, eq=False)
class Current:
    """Body-fixed current velocity and its body-frame time derivative.

    The current is irrotational: the third (yaw) component of ``nu_c`` is
    exactly zero.  ``nu_c_dot`` is the total derivative seen in the body
    frame (explicit time variation plus the frame-rotation term), so it may
    have nonzero planar components even for a steady earth-fixed current.
    """

    nu_c: np.ndarray
    nu_c_dot: np.ndarray

    def __post_init__(self):
        nu_c = np.asarray(self.nu_c, dtype=float)
        nu_c_dot = np.asarray(self.nu_c_dot, dtype=float)
        if nu_c.shape != (3,) or nu_c_dot.shape != (3,):
            raise ValueError("current vectors must have shape (3,)")
        if not (np.all(np.isfinite(nu_c)) and np.all(np.isfinite(nu_c_dot))):
            raise ValueError("current vectors must be finite")
        if nu_c[2] != 0.0:
            raise ValueError("current is irrotational: yaw component of nu_c must be 0")
        object.__setattr__(self, "nu_c", nu_c)
        object.__setattr__(self, "nu_c_dot", nu_c_dot)

    @classmethod
    def zero(cls) -> "Current":
        return cls(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class ParameterVector:
    """The 8 unknown hydrodynamic parameters.

    ``ca1``/``ca2`` are the added-mass Coriolis coefficients acting through
    the sway and surge relative velocities; ``xu, yv, nr`` are linear drag
    coefficients and ``xuu, yvv, nrr`` quadratic drag coefficients.
    """

    ca1: float
    ca2: float
    xu: float
    yv: float
    nr: float
    xuu: float
    yvv: float
    nrr: float

    @classmethod
    def zero(cls) -> "ParameterVector":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, theta) -> "ParameterVector":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (N_PARAMS,):
            raise ValueError(f"parameter vector must have shape ({N_PARAMS},), got {theta.shape}")
        return cls(*theta)

    def as_array(self) -> np.ndarray:
        return np.array([self.ca1, self.ca2, self.xu, self.yv, self.nr,
                         self.xuu, self.yvv, self.nrr])


def _theta_array(theta) -> np.ndarray:
    if isinstance(theta, ParameterVector):
        return theta.as_array()
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N_PARAMS,):
        raise ValueError(f"parameter vector must have shape ({N_PARAMS},), got {theta.shape}")
    return theta


@dataclass(eq=False)
class VehicleParams:
    """Rigid-body constants, known added mass, and the simulator's true
    hydrodynamic parameters.

    ``true_theta`` is used only by the plant; controllers and identifiers
    see it through measurements alone.  The combined inertia
    ``M = M_RB + M_A`` is diagonal and positive definite by construction.
    """

    m: float
    Iz: float
    Ma_diag: np.ndarray
    true_theta: ParameterVector
    m_total: np.ndarray = field(init=False, repr=False)
    m_total_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.Ma_diag = np.asarray(self.Ma_diag, dtype=float)
        if self.m <= 0.0 or self.Iz <= 0.0:
            raise ValueError("mass and yaw inertia must be positive")
        if self.Ma_diag.shape != (3,) or np.any(self.Ma_diag < 0.0):
            raise ValueError("added-mass magnitudes must be 3 nonnegative values")
        self.m_total = np.array([self.m, self.m, self.Iz]) + self.Ma_diag
        self.m_total_inv = 1.0 / self.m_total

    @property
    def M_RB(self) -> np.ndarray:
        return np.diag([self.m, self.m, self.Iz])

    @property
    def M_A(self) -> np.ndarray:
        return np.diag(self.Ma_diag)

    @property
    def M(self) -> np.ndarray:
        return np.diag(self.m_total)


def rotation_from_yaw(psi: float) -> np.ndarray:
    """Body-to-earth coordinate transformation for yaw angle ``psi``."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation(pose: Pose) -> np.ndarray:
    """Body-to-earth coordinate transformation at the given pose."""
    return rotation_from_yaw(pose.psi)


def coriolis_rb(vel: BodyVelocity, params: VehicleParams) -> np.ndarray:
    """Rigid-body centripetal/Coriolis matrix (skew contribution only)."""
    mu, mv = params.m * vel.u, params.m * vel.v
    return np.array([[0.0, 0.0, -mv], [0.0, 0.0, mu], [mv, -mu, 0.0]])


def coriolis_a(vel_rel: BodyVelocity, theta) -> np.ndarray:
    """Added-mass centripetal/Coriolis matrix in the relative flow."""
    th = _theta_array(theta)
    a1, a2 = th[0] * vel_rel.v, th[1] * vel_rel.u
    return np.array([[0.0, 0.0, a1], [0.0, 0.0, -a2], [-a1, a2, 0.0]])


def damping(vel_rel: BodyVelocity, theta) -> np.ndarray:
    """Diagonal linear-plus-quadratic drag matrix in the relative flow."""
    th = _theta_array(theta)
    return np.diag([th[2] + th[5] * abs(vel_rel.u),
                    th[3] + th[6] * abs(vel_rel.v),
                    th[4] + th[7] * abs(vel_rel.r)])


def hydro_regressor(flow, vel) -> np.ndarray:
    """3x8 regressor ``H(a, b)`` with ``H(a, b) @ theta = C_A(a) b + D_A(a) b``.

    ``flow`` selects where the velocity-dependent matrices are evaluated and
    ``vel`` is the vector they act on; the two coincide for the plain
    hydrodynamic force but differ in the constant-current decomposition.
    """
    au, av, ar = float(flow[0]), float(flow[1]), float(flow[2])
    bu, bv, br = float(vel[0]), float(vel[1]), float(vel[2])
    out = np.zeros((3, N_PARAMS))
    out[0, 0] = av * br
    out[0, 2] = bu
    out[0, 5] = abs(au) * bu
    out[1, 1] = -au * br
    out[1, 3] = bv
    out[1, 6] = abs(av) * bv
    out[2, 0] = -av * bu
    out[2, 1] = au * bv
    out[2, 4] = br
    out[2, 7] = abs(ar) * br
    return out


def regressor_full(state: State, current: Current, params: VehicleParams) -> np.ndarray:
    """6x8 regressor of the unknown drift: rows 0-2 zero, rows 3-5 give
    ``-M^-1 (C_A(nu_r) + D_A(nu_r)) nu_r`` when multiplied by theta."""
    nu_r = state.vel.as_array() - current.nu_c
    out = np.zeros((STATE_DIM, N_PARAMS))
    out[3:, :] = -params.m_total_inv[:, None] * hydro_regressor(nu_r, nu_r)
    return out


def drift_known(state: State, current_accel, params: VehicleParams) -> np.ndarray:
    """Known part of the drift: kinematics plus added-mass current forcing
    and the rigid-body Coriolis reaction (restoring term is zero)."""
    nu = state.vel.as_array()
    out = np.empty(STATE_DIM)
    out[:3] = rotation_from_yaw(state.pose.psi) @ nu
    crb_nu = coriolis_rb(state.vel, params) @ nu
    out[3:] = params.m_total_inv * (params.Ma_diag * np.asarray(current_accel, dtype=float) - crb_nu)
    return out


def control_effectiveness(params: VehicleParams) -> np.ndarray:
    """Constant 6x3 input matrix: forces/moments act through ``M^-1``."""
    out = np.zeros((STATE_DIM, 3))
    out[3:, :] = np.diag(params.m_total_inv)
    return out


def residual_regressor(state: State, params: VehicleParams) -> np.ndarray:
    """Unknown-drift regressor of the current-free residual model."""
    return regressor_full(state, Current.zero(), params)


def residual_drift(state: State, params: VehicleParams) -> np.ndarray:
    """Known drift of the current-free residual model."""
    return drift_known(state, np.zeros(3), params)


def current_feedforward(state: State, current: Current, theta_hat, params: VehicleParams) -> np.ndarray:
    """Force/moment compensating the current so that the closed loop matches
    the residual model.

    Returns ``-M_A nu_c_dot + H_c theta_hat`` where ``H_c theta`` is the
    difference between the hydrodynamic force in the relative flow and in
    the body flow.  Exactly linear in ``theta_hat``; vanishes without a
    current.
    """
    th = _theta_array(theta_hat)
    nu = state.vel.as_array()
    nu_r = nu - current.nu_c
    regressor_c = hydro_regressor(nu_r, nu_r) - hydro_regressor(nu, nu)
    return -params.Ma_diag * current.nu_c_dot + regressor_c @ th


def body_current_from_earth(psi: float, r: float, eta_c_dot) -> Current:
    """Body-frame current seen by the craft in a constant earth-fixed flow.

    The planar current is rotated into the body frame; its body-frame rate
    comes purely from the frame rotation at yaw rate ``r``.
    """
    eta_c_dot = np.asarray(eta_c_dot, dtype=float)
    if eta_c_dot.shape != (2,):
        raise ValueError("earth-fixed current must be a planar 2-vector")
    c, s = math.cos(psi), math.sin(psi)
    uc = c * eta_c_dot[0] + s * eta_c_dot[1]
    vc = -s * eta_c_dot[0] + c * eta_c_dot[1]
    return Current(np.array([uc, vc, 0.0]), np.array([r * vc, -r * uc, 0.0]))


def constant_current_model(state: State, eta_c_dot, theta_hat, params: VehicleParams):
    """Residual decomposition for a constant earth-fixed current.

    With a steady earth current the body current becomes a function of the
    state, so its effect can be folded into the learned model instead of
    being treated as an exogenous signal.  Returns the redefined 6x8
    regressor, 6-vector known drift, and the steady feedforward force that
    holds the station (the force needed to cancel the drag of the flow past
    a motionless craft).
    """
    th = _theta_array(theta_hat)
    current = body_current_from_earth(state.pose.psi, state.vel.r, eta_c_dot)
    nu = state.vel.as_array()
    nu_c = current.nu_c
    nu_r = nu - nu_c

    regressor = np.zeros((STATE_DIM, N_PARAMS))
    regressor[3:, :] = -params.m_total_inv[:, None] * (
        hydro_regressor(-nu_c, nu_c) + hydro_regressor(nu_r, nu_r))

    drift = np.empty(STATE_DIM)
    drift[:3] = rotation_from_yaw(state.pose.psi) @ nu
    drift[3:] = -params.m_total_inv * (coriolis_rb(state.vel, params) @ nu)

    tau_ss = -params.Ma_diag * current.nu_c_dot - hydro_regressor(-nu_c, nu_c) @ th
    return regressor, drift, tau_ss
