"""Model-based actor-critic learner for the station-keeping value function.

The value function is approximated over a basis of the 21 quadratic
monomials of the 6-dimensional state, which is exact for the linearized
problem and fixes the weight dimension used throughout.  The critic weights
are adapted by normalized least squares on the Bellman residual, evaluated
both along the trajectory and at a fixed set of extrapolation states using
the identified model; the actor weights trail the critic inside a
projection ball.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dynamics
from .dynamics import STATE_DIM

__all__ = [
    "QuadraticBasis",
    "CostWeights",
    "CriticState",
    "ActorState",
    "AdpModel",
    "local_cost",
    "policy",
    "bellman_error",
    "normalization",
    "critic_step",
    "actor_step",
    "extrapolation_set",
    "excitation_monitor",
    "applied_control",
    "weights_from_value_matrix",
]


class QuadraticBasis:
    """All monomials ``zeta_i * zeta_j`` with ``i <= j`` over the 6-state.

    Pairs are ordered lexicographically; both the features and their exact
    gradients vanish at the origin, so any value estimate built on this
    basis satisfies ``V(0) = 0`` and yields zero feedback at the station.
    """

    def __init__(self, dim: int = STATE_DIM):
        self.dim = dim
        self.pairs = [(i, j) for i in range(dim) for j in range(i, dim)]
        self.size = len(self.pairs)
        self._i = np.array([p[0] for p in self.pairs])
        self._j = np.array([p[1] for p in self.pairs])
        # One-hot selectors used to assemble gradients without Python loops.
        self._ei = np.zeros((self.size, dim))
        self._ej = np.zeros((self.size, dim))
        self._ei[np.arange(self.size), self._i] = 1.0
        self._ej[np.arange(self.size), self._j] = 1.0

    def sigma(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        return zeta[self._i] * zeta[self._j]

    def sigma_prime(self, zeta) -> np.ndarray:
        """Exact Jacobian of the features, shape (size, dim)."""
        zeta = np.asarray(zeta, dtype=float)
        return self._ei * zeta[self._j][:, None] + self._ej * zeta[self._i][:, None]


def weights_from_value_matrix(basis: QuadraticBasis, P) -> np.ndarray:
    """Weights reproducing ``zeta^T P zeta`` on the quadratic basis.

    Diagonal monomials take ``P_ii``; cross monomials absorb both symmetric
    off-diagonal entries and take ``2 P_ij``.
    """
    P = np.asarray(P, dtype=float)
    if P.shape != (basis.dim, basis.dim):
        raise ValueError(f"P must be {basis.dim}x{basis.dim}")
    w = np.empty(basis.size)
    for k, (i, j) in enumerate(basis.pairs):
        w[k] = P[i, i] if i == j else 2.0 * P[i, j]
    return w


@dataclass(eq=False)
class CostWeights:
    """State and control weights of the quadratic running cost."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        _require_spd(self.Q, "Q")
        _require_spd(self.R, "R")
        self.R_inv = np.linalg.inv(self.R)


def _require_spd(mat: np.ndarray, name: str):
    if mat.shape[0] != mat.shape[1] or not np.allclose(mat, mat.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(mat)) <= 0.0:
        raise ValueError(f"{name} must be positive definite")


@dataclass(eq=False)
class CriticState:
    """Critic weights with their least-squares adaptation gain matrix.

    The gain matrix stays symmetric positive definite and spectrally below
    ``gamma_bar``; ``beta`` is the forgetting factor and ``k_rho`` the
    normalization gain.
    """

    weights: np.ndarray
    gain: np.ndarray
    k_c1: float = 0.25
    k_c2: float = 0.5
    k_rho: float = 0.25
    beta: float = 0.025
    gamma_bar: float = 1.0e4

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)
        self.gain = np.array(self.gain, dtype=float)
        if self.gain.shape != (self.weights.size, self.weights.size):
            raise ValueError("gain matrix must be square and match the weights")
        _require_spd(self.gain, "gain")
        if min(self.k_c1, self.k_c2, self.k_rho, self.beta, self.gamma_bar) <= 0.0:
            raise ValueError("critic gains must be positive")
        if gain_norm(self.gain) > self.gamma_bar:
            raise ValueError("initial gain norm exceeds the saturation bound")


@dataclass(eq=False)
class ActorState:
    """Policy weights confined to a ball of radius ``w_bar``.

    The default radius leaves ample room for the Riccati-oracle weights of
    a heavy, lightly damped craft (norm around 2e3 for the reference
    vehicle), which must start inside the ball.
    """

    weights: np.ndarray
    k_a: float = 1.0
    w_bar: float = 1.0e4

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=float)
        if self.k_a <= 0.0 or self.w_bar <= 0.0:
            raise ValueError("actor gain and projection radius must be positive")
        if np.linalg.norm(self.weights) > self.w_bar:
            raise ValueError("initial actor weights lie outside the projection ball")


@dataclass(eq=False)
class AdpModel:
    """Everything the learner needs to evaluate Bellman residuals.

    ``drift`` maps ``(zeta, theta_hat)`` to the 6-vector model drift of the
    residual (current-free) plant; ``g`` is the constant input matrix.  The
    learner never touches the true plant.
    """

    basis: QuadraticBasis
    cost: CostWeights
    g: np.ndarray
    drift: "callable"

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        # Precomputed -1/2 R^-1 g^T, applied to value gradients.
        self._half_rinv_gt = -0.5 * self.cost.R_inv @ self.g.T


def local_cost(zeta, u, cost: CostWeights) -> float:
    """Quadratic running cost; zero only at the station with no effort."""
    zeta = np.asarray(zeta, dtype=float)
    u = np.asarray(u, dtype=float)
    return float(zeta @ cost.Q @ zeta + u @ cost.R @ u)


def policy(model: AdpModel, zeta, actor: ActorState) -> np.ndarray:
    """Feedback from the actor weights: ``-1/2 R^-1 g^T sigma'(zeta)^T w_a``."""
    grad_v = model.basis.sigma_prime(zeta).T @ actor.weights
    return model._half_rinv_gt @ grad_v


def _policy_from_weights(model: AdpModel, zeta, weights) -> np.ndarray:
    grad_v = model.basis.sigma_prime(zeta).T @ weights
    return model._half_rinv_gt @ grad_v


def bellman_error(model: AdpModel, zeta, theta_hat, critic_weights,
                  actor_weights):
    """Residual of the approximate stationarity condition at ``zeta``.

    Returns ``(delta, omega)`` where ``omega`` is the value-feature rate
    along the model flow under the actor's policy and
    ``delta = cost + critic_weights @ omega``; ``delta`` is affine in the
    critic weights with slope ``omega``.
    """
    zeta = np.asarray(zeta, dtype=float)
    u = _policy_from_weights(model, zeta, actor_weights)
    flow = model.drift(zeta, theta_hat) + model.g @ u
    omega = model.basis.sigma_prime(zeta) @ flow
    delta = local_cost(zeta, u, model.cost) + float(np.dot(critic_weights, omega))
    return delta, omega


def normalization(critic: CriticState, omega) -> float:
    """Least-squares normalization ``1 + k_rho omega^T Gamma omega`` (>= 1)."""
    omega = np.asarray(omega, dtype=float)
    return 1.0 + critic.k_rho * float(omega @ critic.gain @ omega)


def gain_norm(gain: np.ndarray) -> float:
    """Spectral norm of the (symmetric) adaptation gain."""
    return float(np.max(np.abs(np.linalg.eigvalsh(gain))))


def critic_step(critic: CriticState, on_policy, extrapolated, dt: float) -> None:
    """Advance the critic weights and gain matrix by one Euler step.

    ``on_policy`` is the tuple ``(delta, omega, rho)`` at the current state;
    ``extrapolated`` is a sequence of such tuples at the extrapolation
    states.  The gain propagates through its inverse (which keeps it
    positive definite for any step with ``beta dt < 1``) and freezes for the
    step if the update would push its norm past the saturation bound.
    """
    delta, omega, rho = on_policy
    omega = np.asarray(omega, dtype=float)
    if rho < 1.0 or any(item[2] < 1.0 for item in extrapolated):
        raise ValueError("normalization constants must be >= 1")

    grad = critic.k_c1 * (delta / rho) * omega
    if extrapolated:
        acc = np.zeros_like(critic.weights)
        for delta_k, omega_k, rho_k in extrapolated:
            acc += (delta_k / rho_k) * np.asarray(omega_k, dtype=float)
        grad += (critic.k_c2 / len(extrapolated)) * acc
    critic.weights -= dt * (critic.gain @ grad)

    gain_inv = np.linalg.inv(critic.gain)
    gain_inv = (1.0 - critic.beta * dt) * gain_inv \
        + dt * critic.k_c1 * np.outer(omega, omega) / rho
    candidate = np.linalg.inv(gain_inv)
    candidate = 0.5 * (candidate + candidate.T)
    if gain_norm(candidate) <= critic.gamma_bar:
        critic.gain = candidate
    if np.min(np.linalg.eigvalsh(critic.gain)) <= 0.0:
        raise ArithmeticError("critic gain matrix lost positive definiteness")


def actor_step(actor: ActorState, critic_weights, dt: float) -> None:
    """Pull the actor weights toward the critic, projected onto the ball.

    On the boundary an outward-pointing update loses its radial component;
    a final rescale guards against the tangent step leaving the ball by the
    Euler discretization error.
    """
    update = -actor.k_a * (actor.weights - np.asarray(critic_weights, dtype=float))
    norm = np.linalg.norm(actor.weights)
    if norm >= actor.w_bar:
        radial = actor.weights / norm
        outward = float(update @ radial)
        if outward > 0.0:
            update = update - outward * radial
    actor.weights += dt * update
    norm = np.linalg.norm(actor.weights)
    if norm > actor.w_bar:
        actor.weights *= actor.w_bar / norm


def _halton_column(indices: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(indices.shape, dtype=float)
    f = 1.0
    idx = indices.copy()
    while np.any(idx > 0):
        f /= base
        out += f * (idx % base)
        idx //= base
    return out


def extrapolation_set(box, n_points: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy states filling the operating box, shape (n, 6).

    Halton points over the first six prime bases, started at an offset
    derived from the seed so distinct seeds give distinct (still
    deterministic) sets.
    """
    box = np.asarray(box, dtype=float)
    if box.shape != (STATE_DIM,) or np.any(box <= 0.0):
        raise ValueError("box must give 6 positive half-widths")
    if n_points < 1:
        raise ValueError("need at least one extrapolation point")
    bases = (2, 3, 5, 7, 11, 13)
    offset = 20 + (int(seed) % 1009)
    indices = np.arange(offset, offset + n_points, dtype=np.int64)
    unit = np.stack([_halton_column(indices, b) for b in bases], axis=1)
    return (2.0 * unit - 1.0) * box


def excitation_monitor(model: AdpModel, points, theta_hat, actor_weights,
                       critic: CriticState) -> float:
    """Smallest eigenvalue of the normalized feature-rate outer-product sum.

    A positive value certifies that the extrapolation states currently
    excite every direction of the weight space; it is logged at each critic
    update during a run.
    """
    points = np.asarray(points, dtype=float)
    acc = np.zeros((model.basis.size, model.basis.size))
    for zeta_k in points:
        _, omega_k = bellman_error(model, zeta_k, theta_hat, np.zeros(model.basis.size),
                                   actor_weights)
        rho_k = normalization(critic, omega_k)
        acc += np.outer(omega_k, omega_k) / rho_k
    acc /= points.shape[0]
    # The sum is positive semidefinite; clamp the eigensolver's noise floor.
    return max(float(np.min(np.linalg.eigvalsh(acc))), 0.0)


def applied_control(model: AdpModel, zeta, actor: ActorState, theta_hat,
                    current, params, eta_c_dot=None) -> np.ndarray:
    """Total force/moment: actor feedback plus the current feedforward.

    With ``eta_c_dot`` given, the steady constant-current feedforward is
    used instead of the measured-current compensation.
    """
    state = dynamics.State.from_array(zeta)
    if eta_c_dot is not None:
        _, _, feedforward = dynamics.constant_current_model(
            state, eta_c_dot, theta_hat, params)
    else:
        feedforward = dynamics.current_feedforward(state, current, theta_hat, params)
    return policy(model, zeta, actor) + feedforward
