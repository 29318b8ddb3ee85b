"""Linearized station-keeping model and continuous algebraic Riccati solver.

The residual craft model linearized at rest is a damped double integrator:
pose rates equal body velocity (the frames coincide at zero yaw) and the
only velocity feedback is the linear drag.  Solving the infinite-horizon
Riccati equation for that model gives the quadratic value function that the
learning loop should reproduce, which makes it both a principled weight
initialization and an independent correctness oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (STATE_DIM, VehicleParams, _theta_array,
                       control_effectiveness)


class RiccatiError(RuntimeError):
    """Raised when the Riccati integration fails to reach stationarity."""


@dataclass(eq=False)
class LinearModel:
    """State matrix ``A`` and input matrix ``B`` of a linear plant."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        n, m = self.A.shape[0], self.B.shape[1]
        if self.A.shape != (n, n) or self.B.shape != (n, m):
            raise ValueError("A must be square and B conformable")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
            raise ValueError("linear model entries must be finite")
        if not _is_stabilizable(self.A, self.B):
            raise ValueError("(A, B) is not stabilizable")


def _is_stabilizable(A: np.ndarray, B: np.ndarray) -> bool:
    # PBH test on every eigenvalue with nonnegative real part.
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real < -1e-12:
            continue
        pencil = np.hstack([lam * np.eye(n) - A, B.astype(complex)])
        if np.linalg.matrix_rank(pencil, tol=1e-10) < n:
            return False
    return True


@dataclass(eq=False)
class RiccatiSolution:
    """Stabilizing Riccati solution ``P`` and the feedback gain ``K = R^-1 B^T P``."""

    P: np.ndarray
    K: np.ndarray


def linearize(params: VehicleParams, theta) -> LinearModel:
    """Linearize the residual drift about the station (analytic Jacobian).

    At rest the Coriolis and quadratic-drag terms vanish to first order, so
    the velocity block carries only the linear drag scaled by the inverse
    inertia, and the pose block is the identity kinematic coupling.
    """
    th = _theta_array(theta)
    A = np.zeros((STATE_DIM, STATE_DIM))
    A[:3, 3:] = np.eye(3)
    A[3:, 3:] = -np.diag(params.m_total_inv * th[2:5])
    return LinearModel(A, control_effectiveness(params))


def solve_are(model: LinearModel, Q, R, tol: float = 1e-12,
              max_steps: int = 200_000) -> RiccatiSolution:
    """Solve ``A^T P + P A - P B R^-1 B^T P + Q = 0`` for the stabilizing P.

    Integrates the differential Riccati equation in time-to-go from ``P = 0``
    with classical RK4 until the derivative norm drops below ``tol``.  The
    step starts small to resolve the transient and grows geometrically once
    the solution is smooth; slow closed-loop modes of heavy craft need a
    horizon of a few hundred seconds, far beyond the initial step scale.
    """
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    A, B = model.A, model.B
    R_inv = np.linalg.inv(R)

    def deriv(P):
        return A.T @ P + P @ A - P @ B @ R_inv @ B.T @ P + Q

    P = np.zeros_like(A)
    h = 1e-3
    for step in range(max_steps):
        k1 = deriv(P)
        if np.linalg.norm(k1) <= tol * max(1.0, np.linalg.norm(P)):
            K = R_inv @ B.T @ P
            return RiccatiSolution(P, K)
        k2 = deriv(P + 0.5 * h * k1)
        k3 = deriv(P + 0.5 * h * k2)
        k4 = deriv(P + h * k3)
        P = P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        P = 0.5 * (P + P.T)
        if not np.all(np.isfinite(P)):
            raise RiccatiError(f"Riccati integration diverged at step {step}")
        if step % 20 == 19:
            h = min(h * 1.25, 0.05)
    raise RiccatiError(
        f"Riccati integration did not reach stationarity in {max_steps} steps")


def are_residual(model: LinearModel, Q, R, P: np.ndarray) -> float:
    """Frobenius norm of the algebraic Riccati equation residual at ``P``."""
    Q = np.asarray(Q, dtype=float)
    R_inv = np.linalg.inv(np.asarray(R, dtype=float))
    A, B = model.A, model.B
    res = A.T @ P + P @ A - P @ B @ R_inv @ B.T @ P + Q
    return float(np.linalg.norm(res))
