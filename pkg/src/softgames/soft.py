"""Closed-form soft-game mathematics.

All policies and values derive from one kernel: the stabilised log-sum-exp
with a signed inverse temperature. Marginalising the joint table over the
other agent's actions at that agent's temperature gives each agent's
certainty-equivalent scores; a weighted softmax over those scores gives the
policies; nesting the two marginalisations gives the state value and the
soft Bellman operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DivergenceError
from .types import GameModel, JointQ, PolicyTable, RationalityParams, SoftValue, TransitionRecord

BETA_ZERO_THRESHOLD = kernels.BETA_ZERO_THRESHOLD

lse_beta = kernels.lse_beta
softmax_weighted = kernels.softmax_weighted


def lse_beta_axis(arr: np.ndarray, weights: np.ndarray, beta: float, axis: int) -> np.ndarray:
    """Vectorised lse_beta along one axis of an array."""
    arr = np.moveaxis(np.asarray(arr, dtype=np.float64), axis, -1)
    if math.isinf(beta):
        return arr.max(axis=-1) if beta > 0 else arr.min(axis=-1)
    if abs(beta) < BETA_ZERO_THRESHOLD:
        out = arr @ weights
    else:
        x = beta * arr
        m = x.max(axis=-1, keepdims=True)
        acc = (weights * np.exp(x - m)).sum(axis=-1)
        out = (m[..., 0] + np.log(acc)) / beta
    # Clamp rounding leakage: the exact value lies in [min, max] per row.
    return np.clip(out, arr.min(axis=-1), arr.max(axis=-1))


def softmax_weighted_axis(scores: np.ndarray, weights: np.ndarray, beta: float) -> np.ndarray:
    """Row-wise weighted softmax over the last axis; infinite beta splits
    ties uniformly over the exact argmax/argmin set per row."""
    scores = np.asarray(scores, dtype=np.float64)
    if math.isinf(beta):
        best = scores.max(axis=-1, keepdims=True) if beta > 0 else scores.min(axis=-1, keepdims=True)
        hits = (scores == best).astype(np.float64)
        return hits / hits.sum(axis=-1, keepdims=True)
    if abs(beta) < BETA_ZERO_THRESHOLD:
        return np.broadcast_to(weights, scores.shape).copy()
    x = beta * scores
    e = weights * np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


# Matrix-level operations: one state's (A_pl, A_op) slice of a joint table.
# The deep module reuses these on network output matrices.

def matrix_marginal_player(mat: np.ndarray, params: RationalityParams) -> np.ndarray:
    return lse_beta_axis(mat, params.rho_op, params.beta_op, axis=1)


def matrix_marginal_opponent(mat: np.ndarray, params: RationalityParams) -> np.ndarray:
    return lse_beta_axis(mat, params.rho_pl, params.beta_pl, axis=0)


def matrix_value(mat: np.ndarray, params: RationalityParams, order: str = "player_first") -> float:
    """State value from a joint matrix via nested marginalisation.

    The canonical form nests player-first; the opponent-first form is
    exposed for diagnostics (the two coincide when the temperatures are
    equal, but not in general).
    """
    if order == "player_first":
        marg = matrix_marginal_player(mat, params)
        return float(lse_beta(marg, params.rho_pl, params.beta_pl))
    if order == "opponent_first":
        marg = matrix_marginal_opponent(mat, params)
        return float(lse_beta(marg, params.rho_op, params.beta_op))
    raise ValueError(f"unknown nesting order {order!r}")


def matrix_policy_player(mat: np.ndarray, params: RationalityParams) -> np.ndarray:
    return softmax_weighted(matrix_marginal_player(mat, params), params.rho_pl, params.beta_pl)


def matrix_policy_opponent(mat: np.ndarray, params: RationalityParams) -> np.ndarray:
    return softmax_weighted(matrix_marginal_opponent(mat, params), params.rho_op, params.beta_op)


# Table-level operations.

def marginal_q_player(q: JointQ, s: int, params: RationalityParams) -> np.ndarray:
    """Certainty-equivalent scores per player action at state s."""
    return matrix_marginal_player(q.values[s], params)


def marginal_q_opponent(q: JointQ, s: int, params: RationalityParams) -> np.ndarray:
    return matrix_marginal_opponent(q.values[s], params)


def soft_value_from_marginal(q_pl_marg: np.ndarray, params: RationalityParams) -> float:
    return float(lse_beta(q_pl_marg, params.rho_pl, params.beta_pl))


def state_value(q: JointQ, s: int, params: RationalityParams, order: str = "player_first") -> float:
    return matrix_value(q.values[s], params, order)


def nesting_gap(q: JointQ, params: RationalityParams) -> float:
    """Max-over-states gap between the player-first and opponent-first
    nested values; zero at equal temperatures, a diagnostic otherwise."""
    gap = 0.0
    for s in range(q.shape[0]):
        gap = max(gap, abs(state_value(q, s, params, "player_first")
                           - state_value(q, s, params, "opponent_first")))
    return gap


def player_policy(q: JointQ, s: int, params: RationalityParams) -> np.ndarray:
    if np.any(np.isnan(q.values[s])):
        raise ValueError("NaN in joint Q table")
    return matrix_policy_player(q.values[s], params)


def opponent_policy(q: JointQ, s: int, params: RationalityParams) -> np.ndarray:
    if np.any(np.isnan(q.values[s])):
        raise ValueError("NaN in joint Q table")
    return matrix_policy_opponent(q.values[s], params)


def policy_tables(q: JointQ, params: RationalityParams) -> tuple[PolicyTable, PolicyTable]:
    """Both closed-form policies for every state of a joint table."""
    marg_pl = lse_beta_axis(q.values, params.rho_op, params.beta_op, axis=2)
    marg_op = lse_beta_axis(q.values, params.rho_pl, params.beta_pl, axis=1)
    return (
        PolicyTable(softmax_weighted_axis(marg_pl, params.rho_pl, params.beta_pl), "player"),
        PolicyTable(softmax_weighted_axis(marg_op, params.rho_op, params.beta_op), "opponent"),
    )


def joint_q_from_value(model: GameModel, v: SoftValue) -> JointQ:
    """One-step lookahead table R + gamma * E[v(s')]."""
    return JointQ(model.rewards + model.gamma * model.expected_next_value(v.values))


def bellman_backup(model: GameModel, v: SoftValue, params: RationalityParams) -> SoftValue:
    """One application of the soft Bellman operator (player-first nesting)."""
    q = model.rewards + model.gamma * model.expected_next_value(v.values)
    marg = lse_beta_axis(q, params.rho_op, params.beta_op, axis=2)
    return SoftValue(lse_beta_axis(marg, params.rho_pl, params.beta_pl, axis=1))


@dataclass
class SolveResult:
    value: SoftValue
    q: JointQ
    policy_pl: PolicyTable
    policy_op: PolicyTable
    iterations: int
    residual: float


def solve_value_iteration(
    model: GameModel,
    params: RationalityParams,
    tol: float = 1e-9,
    max_iters: int = 100_000,
    v0: SoftValue | None = None,
) -> SolveResult:
    """Iterate the soft Bellman operator to its unique fixed point.

    Stops when the sup-norm step falls to tol; raises DivergenceError if
    max_iters is exhausted (gamma too close to 1, or tol too small).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = v0 if v0 is not None else SoftValue.zeros(model.n_states)
    residual = math.inf
    for it in range(1, max_iters + 1):
        v_next = bellman_backup(model, v, params)
        residual = float(np.max(np.abs(v_next.values - v.values)))
        v = v_next
        if residual <= tol:
            q = joint_q_from_value(model, v)
            pol_pl, pol_op = policy_tables(q, params)
            return SolveResult(v, q, pol_pl, pol_op, it, residual)
    raise DivergenceError(
        f"value iteration did not reach tol={tol} in {max_iters} iterations "
        f"(last residual {residual:.3e})"
    )


def td_update(
    q: JointQ, t: TransitionRecord, alpha: float, params: RationalityParams, gamma: float
) -> float:
    """One-entry temporal-difference update toward r + gamma * V(s').

    V(s') is the soft value of the current table at the successor state.
    Returns the updated entry. (The discount is not part of TransitionRecord
    or the params, so it is passed explicitly.)
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    v_next = soft_value_from_marginal(marginal_q_player(q, t.s_next, params), params)
    entry = q.values[t.s, t.a_pl, t.a_op]
    entry += alpha * (t.r + gamma * v_next - entry)
    q.values[t.s, t.a_pl, t.a_op] = entry
    return float(entry)


def sample_action(policy_row: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from one policy row; deterministic given the rng."""
    policy_row = np.asarray(policy_row, dtype=np.float64)
    if np.any(np.isnan(policy_row)):
        raise ValueError("degenerate policy row (NaN)")
    if abs(float(policy_row.sum()) - 1.0) > 1e-9 or np.any(policy_row < 0):
        raise ValueError("policy row must be a normalised distribution")
    u = rng.random()
    cum = np.cumsum(policy_row)
    return int(min(np.searchsorted(cum, u, side="right"), policy_row.size - 1))
