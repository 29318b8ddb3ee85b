"""Concurrent-learning identification of the hydrodynamic parameters.

A state observer copies the model with a measurable-error correction, and
the parameter update combines the instantaneous observer error with a
recorded stack of past regressor/derivative data.  The stack removes the
classical excitation requirement: once its summed regressor Gramian has
full rank, the parameter error contracts even if the craft sits still.

State derivatives in the stack are never measured directly; they come from
smoothing the recorded state history around each sample instant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dynamics
from .dynamics import N_PARAMS, STATE_DIM, Current, State, VehicleParams

__all__ = [
    "IdentifierDivergenceError",
    "RankConditionError",
    "StackEntry",
    "HistoryStack",
    "IdentifierState",
    "smooth_derivative",
    "observer_step",
    "parameter_step",
    "rank_condition",
    "convergence_diagnostics",
    "save_stack",
    "load_stack",
]


class IdentifierDivergenceError(RuntimeError):
    """Raised when the observer or parameter estimate becomes non-finite."""


class RankConditionError(RuntimeError):
    """Raised when an operation requires a rank-complete history stack."""

    def __init__(self, message: str, y_min: float):
        super().__init__(message)
        self.y_min = y_min


@dataclass(eq=False)
class StackEntry:
    """One recorded sample: state, current, applied force, and the smoothed
    state derivative, plus the regressor evaluated at the sample."""

    t: float
    zeta: np.ndarray
    nu_c: np.ndarray
    nu_c_dot: np.ndarray
    tau_b: np.ndarray
    zeta_dot: np.ndarray
    regressor: np.ndarray
    deriv_err: float = 0.0


class HistoryStack:
    """Fixed-capacity set of recorded samples selected for excitation.

    Insertion maximizes the smallest singular value of the vertically
    stacked regressors: while below capacity every finite candidate is
    kept, afterwards a candidate only displaces the entry whose replacement
    most improves that singular value, and only if it improves at all.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("stack capacity must be positive")
        self.capacity = capacity
        self.entries: list[StackEntry] = []
        self._sums = None

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def full(self) -> bool:
        return len(self.entries) >= self.capacity

    @property
    def d_bar(self) -> float:
        """Largest recorded derivative-error estimate across entries."""
        if not self.entries:
            return 0.0
        return max(e.deriv_err for e in self.entries)

    def gramian(self) -> np.ndarray:
        """Sum of ``Y_j^T Y_j`` over the stack (8x8)."""
        acc = np.zeros((N_PARAMS, N_PARAMS))
        for e in self.entries:
            acc += e.regressor.T @ e.regressor
        return acc

    def min_singular_value(self) -> float:
        if not self.entries:
            return 0.0
        eigs = np.linalg.eigvalsh(self.gramian())
        return float(np.sqrt(max(eigs[0], 0.0)))

    def insert(self, entry: StackEntry) -> bool:
        """Try to add ``entry``; returns whether it was accepted."""
        if not np.all(np.isfinite(entry.regressor)):
            return False
        if not self.full:
            self.entries.append(entry)
            self._sums = None
            return True
        base = self.gramian()
        new_term = entry.regressor.T @ entry.regressor
        current_min = np.linalg.eigvalsh(base)[0]
        best_gain, best_slot = current_min, -1
        for slot, old in enumerate(self.entries):
            trial = base - old.regressor.T @ old.regressor + new_term
            lam = np.linalg.eigvalsh(trial)[0]
            if lam > best_gain:
                best_gain, best_slot = lam, slot
        if best_slot < 0:
            return False
        self.entries[best_slot] = entry
        self._sums = None
        return True

    def prediction_sums(self, params: VehicleParams):
        """Stack-constant pieces of the parameter update: the Gramian ``S``
        and the data vector ``b`` with ``S theta_hat - b`` the summed
        prediction error gradient.  Cached until the stack changes."""
        if self._sums is None:
            g = dynamics.control_effectiveness(params)
            S = np.zeros((N_PARAMS, N_PARAMS))
            b = np.zeros(N_PARAMS)
            for e in self.entries:
                state = State.from_array(e.zeta)
                f0 = dynamics.drift_known(state, e.nu_c_dot, params)
                S += e.regressor.T @ e.regressor
                b += e.regressor.T @ (e.zeta_dot - f0 - g @ e.tau_b)
            self._sums = (S, b)
        return self._sums

    def update_rate_bound(self, gamma_theta, k_theta: float) -> float:
        """Fastest contraction rate of the recorded-data parameter update.

        The explicit-Euler update at period ``dt`` is stable only while
        this rate stays below ``2 / dt``.
        """
        if not self.entries:
            return 0.0
        root = np.sqrt(np.asarray(gamma_theta, dtype=float))
        weighted = root[:, None] * self.gramian() * root[None, :]
        return k_theta * float(np.max(np.linalg.eigvalsh(weighted)))


def rank_condition(stack: HistoryStack, rel_tol: float = 1e-8):
    """Check that the stack Gramian has full rank 8.

    Returns ``(satisfied, y_min)`` where ``y_min`` is the smallest Gramian
    eigenvalue; satisfaction uses an eigenvalue cutoff relative to the
    largest eigenvalue.
    """
    if not stack.entries:
        return False, 0.0
    eigs = np.linalg.eigvalsh(stack.gramian())
    y_min = float(eigs[0])
    y_max = float(eigs[-1])
    return bool(y_min > rel_tol * max(y_max, 0.0)), y_min


def smooth_derivative(times, values):
    """Derivative of a sampled signal at the window center.

    Fits an ordinary least-squares quadratic per component over the window
    and evaluates its slope at the mid-time.  Returns the derivative row
    and a scalar error estimate (the norm of the per-component slope
    standard errors from the fit residuals).  Needs at least 5 samples with
    the center strictly inside the window.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    n = times.size
    if n < 5:
        raise ValueError("smoothing window needs at least 5 samples")
    center = 0.5 * (times[0] + times[-1])
    if not (times[0] < center < times[-1]):
        raise ValueError("window must contain its center strictly inside")
    s = times - center
    vand = np.column_stack([np.ones(n), s, s * s])
    coef, *_ = np.linalg.lstsq(vand, values, rcond=None)
    resid = values - vand @ coef
    dof = max(n - 3, 1)
    # Variance of the slope coefficient from the fit covariance.
    slope_var = np.linalg.inv(vand.T @ vand)[1, 1]
    slope_se = np.sqrt(np.sum(resid * resid, axis=0) / dof * slope_var)
    return coef[1], float(np.linalg.norm(slope_se))


@dataclass(eq=False)
class IdentifierState:
    """Observer state, parameter estimate, and the adaptation gains.

    ``k_zeta`` is the diagonal of the observer gain, ``gamma_theta`` the
    diagonal of the parameter-update gain, and ``k_theta`` the scalar
    weight of the recorded-data term.
    """

    zeta_hat: np.ndarray
    theta_hat: np.ndarray
    k_zeta: np.ndarray
    gamma_theta: np.ndarray
    k_theta: float

    def __post_init__(self):
        self.zeta_hat = np.array(self.zeta_hat, dtype=float)
        self.theta_hat = np.array(self.theta_hat, dtype=float)
        self.k_zeta = np.asarray(self.k_zeta, dtype=float)
        self.gamma_theta = np.asarray(self.gamma_theta, dtype=float)
        if self.zeta_hat.shape != (STATE_DIM,) or self.theta_hat.shape != (N_PARAMS,):
            raise ValueError("estimate dimensions must be 6 and 8")
        if self.k_zeta.shape != (STATE_DIM,) or np.any(self.k_zeta <= 0.0):
            raise ValueError("observer gain diagonal must be 6 positive values")
        if self.gamma_theta.shape != (N_PARAMS,) or np.any(self.gamma_theta <= 0.0):
            raise ValueError("parameter gain diagonal must be 8 positive values")
        if self.k_theta <= 0.0:
            raise ValueError("recorded-data gain must be positive")

    def estimation_error(self, zeta_measured) -> np.ndarray:
        return np.asarray(zeta_measured, dtype=float) - self.zeta_hat


def observer_step(ident: IdentifierState, zeta_measured, current: Current,
                  tau_b, dt: float, params: VehicleParams) -> np.ndarray:
    """Advance the state observer one Euler step; returns the new estimate.

    The observer copies the model evaluated at the *measured* state with
    the current parameter estimate plus a proportional correction on the
    estimation error, so the error dynamics are driven only by the
    parameter error.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not np.all(np.isfinite(ident.zeta_hat)):
        raise IdentifierDivergenceError("state observer diverged")
    zeta_measured = np.asarray(zeta_measured, dtype=float)
    state = State.from_array(zeta_measured)
    err = zeta_measured - ident.zeta_hat
    rate = (dynamics.regressor_full(state, current, params) @ ident.theta_hat
            + dynamics.drift_known(state, current.nu_c_dot, params)
            + dynamics.control_effectiveness(params) @ np.asarray(tau_b, dtype=float)
            + ident.k_zeta * err)
    ident.zeta_hat = ident.zeta_hat + dt * rate
    if not np.all(np.isfinite(ident.zeta_hat)):
        raise IdentifierDivergenceError("state observer diverged")
    return ident.zeta_hat


def _stack_prediction_error(stack: HistoryStack, theta_hat: np.ndarray,
                            params: VehicleParams) -> np.ndarray:
    """Sum over the stack of ``Y_j^T (zeta_dot_j - f0_j - g tau_j - Y_j theta_hat)``."""
    S, b = stack.prediction_sums(params)
    return b - S @ theta_hat


def parameter_step(ident: IdentifierState, stack: HistoryStack, zeta_measured,
                   current: Current, tau_b, dt: float,
                   params: VehicleParams) -> np.ndarray:
    """Advance the parameter estimate one Euler step; returns the new value.

    Combines the instantaneous observer-error term with the recorded-data
    prediction errors; no instantaneous acceleration is used, only the
    smoothed derivatives stored in the stack.
    """
    if not stack.entries:
        raise ValueError("parameter update needs a nonempty history stack")
    zeta_measured = np.asarray(zeta_measured, dtype=float)
    state = State.from_array(zeta_measured)
    regressor_now = dynamics.regressor_full(state, current, params)
    err = zeta_measured - ident.zeta_hat
    rate = ident.gamma_theta * (
        regressor_now.T @ err
        + ident.k_theta * _stack_prediction_error(stack, ident.theta_hat, params))
    ident.theta_hat = ident.theta_hat + dt * rate
    if not np.all(np.isfinite(ident.theta_hat)):
        raise IdentifierDivergenceError("parameter estimate diverged")
    return ident.theta_hat


def convergence_diagnostics(ident: IdentifierState, stack: HistoryStack):
    """Contraction rate and ultimate bound implied by the current stack.

    Returns ``(alpha, ultimate_bound)``: the error system decays at least
    at rate ``alpha`` outside a ball of radius ``ultimate_bound`` set by
    the stack's derivative-error level.  Requires the rank condition.
    """
    ok, y_min = rank_condition(stack)
    if not ok:
        raise RankConditionError(
            "convergence diagnostics need a rank-complete stack", y_min)
    alpha = 0.5 * min(2.0 * float(np.min(ident.k_zeta)), ident.k_theta * y_min)
    d_theta = stack.d_bar * sum(
        float(np.linalg.norm(e.regressor, 2)) for e in stack.entries)
    bound = float(np.sqrt(ident.k_theta * d_theta ** 2 / (2.0 * alpha * y_min)))
    return alpha, bound


_STACK_HEADER = ("t,x,y,psi,u,v,r,uc,vc,rc,duc,dvc,drc,tau1,tau2,tau3,"
                 "xdot,ydot,psidot,udot,vdot,rdot")


def save_stack(stack: HistoryStack, path) -> None:
    """Persist the stack as CSV, one row per entry."""
    lines = [_STACK_HEADER]
    for e in stack.entries:
        row = np.concatenate([[e.t], e.zeta, e.nu_c, e.nu_c_dot, e.tau_b, e.zeta_dot])
        lines.append(",".join(f"{x:.17g}" for x in row))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_stack(path, params: VehicleParams, capacity: int | None = None) -> HistoryStack:
    """Load a stack CSV, recompute the regressors, and validate the rank
    condition.  The derivative-error estimates are not persisted and load
    as zero."""
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if header != _STACK_HEADER:
            raise ValueError(f"unexpected stack header in {path}")
        for line in f:
            line = line.strip()
            if line:
                rows.append(np.array([float(x) for x in line.split(",")]))
    if capacity is None:
        capacity = max(len(rows), 1)
    stack = HistoryStack(capacity)
    for row in rows:
        if row.size != 22:
            raise ValueError("stack rows must have 22 columns")
        zeta, nu_c, nu_c_dot = row[1:7], row[7:10], row[10:13]
        tau_b, zeta_dot = row[13:16], row[16:22]
        current = Current(nu_c, nu_c_dot)
        regressor = dynamics.regressor_full(State.from_array(zeta), current, params)
        stack.entries.append(StackEntry(row[0], zeta, nu_c, nu_c_dot, tau_b,
                                        zeta_dot, regressor))
    ok, y_min = rank_condition(stack)
    if not ok:
        raise RankConditionError(
            f"loaded stack fails the rank condition (y_min={y_min:.3e})", y_min)
    return stack
