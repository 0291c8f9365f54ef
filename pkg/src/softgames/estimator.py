"""Online maximum-likelihood estimation of the opponent's rationality.

The opponent model is the closed-form policy
pi(b | s) ~ rho_op(b) * exp(beta_op * Qop(s, b)), where Qop is the
player-side marginal of the joint table. Its log-likelihood gradient in
beta_op has the exponential-family form "observed score minus expected
score", which is what grad_beta_op computes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .soft import lse_beta_axis
from .types import EstimatorState, JointQ, RationalityParams


@dataclass
class RoundDataset:
    """(s, a_pl, a_op) triples gathered in one interaction round."""

    states: np.ndarray
    actions_pl: np.ndarray
    actions_op: np.ndarray

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=np.int64)
        self.actions_pl = np.asarray(self.actions_pl, dtype=np.int64)
        self.actions_op = np.asarray(self.actions_op, dtype=np.int64)
        if not (self.states.shape == self.actions_pl.shape == self.actions_op.shape):
            raise ValueError("dataset arrays must share one length")
        if self.m == 0:
            raise ValueError("dataset must contain at least one record")

    @classmethod
    def from_records(cls, records) -> "RoundDataset":
        arr = np.asarray(list(records), dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("records must be (s, a_pl, a_op) triples")
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])

    @property
    def m(self) -> int:
        return int(self.states.size)


def opponent_score_rows(data: RoundDataset, q: JointQ, params: RationalityParams) -> np.ndarray:
    """Per-record opponent marginal rows Qop(s_i, .), shape (m, A_op).

    These are the sufficient statistics: together with the observed actions
    they allow re-evaluating the round's likelihood at any beta_op.
    """
    uniq, inverse = np.unique(data.states, return_inverse=True)
    rows = lse_beta_axis(q.values[uniq], params.rho_pl, params.beta_pl, axis=1)
    return rows[inverse]


def _nll_from_rows(rows: np.ndarray, actions: np.ndarray, rho_op: np.ndarray,
                   beta_op) -> np.ndarray:
    """Negative log-likelihood at one or many beta_op values (vectorised)."""
    beta = np.atleast_1d(np.asarray(beta_op, dtype=np.float64))  # (G,)
    x = beta[:, None, None] * rows[None, :, :]  # (G, m, A)
    m = x.max(axis=-1, keepdims=True)
    log_z = m[..., 0] + np.log((rho_op * np.exp(x - m)).sum(axis=-1))  # (G, m)
    taken = rows[np.arange(rows.shape[0]), actions]  # (m,)
    log_pi = np.log(rho_op[actions])[None, :] + beta[:, None] * taken[None, :] - log_z
    return -log_pi.sum(axis=1)


def log_likelihood(data: RoundDataset, q: JointQ, beta_op: float,
                   params: RationalityParams) -> float:
    """Sum of log pi_op(a_i | s_i) under the model at the given beta_op."""
    if math.isinf(beta_op) or math.isnan(beta_op):
        raise ValueError("beta_op must be finite")
    rows = opponent_score_rows(data, q, params)
    return -float(_nll_from_rows(rows, data.actions_op, params.rho_op, beta_op)[0])


def grad_beta_op(data: RoundDataset, q: JointQ, beta_op: float,
                 params: RationalityParams) -> float:
    """d/d(beta_op) of the round log-likelihood (sum over records, so it
    scales linearly with the dataset size)."""
    if math.isinf(params.beta_pl):
        raise ValueError("estimation requires a finite player temperature")
    rows = opponent_score_rows(data, q, params)
    return float(grad_from_rows(rows, data.actions_op, params.rho_op, beta_op))


def grad_from_rows(rows: np.ndarray, actions: np.ndarray, rho_op: np.ndarray,
                   beta_op: float) -> float:
    x = beta_op * rows
    e = rho_op * np.exp(x - x.max(axis=-1, keepdims=True))
    pi = e / e.sum(axis=-1, keepdims=True)
    observed = rows[np.arange(rows.shape[0]), actions]
    expected = (pi * rows).sum(axis=-1)
    return float((observed - expected).sum())


def sgd_step(state: EstimatorState, data: RoundDataset, q: JointQ,
             params: RationalityParams) -> EstimatorState:
    """One online round: record the incurred loss at the current estimate,
    then ascend the round's likelihood gradient with a 1/sqrt(round) step."""
    rows = opponent_score_rows(data, q, params)
    return sgd_step_from_rows(state, rows, data.actions_op, params.rho_op)


def sgd_step_from_rows(state: EstimatorState, rows: np.ndarray,
                       actions: np.ndarray, rho_op: np.ndarray) -> EstimatorState:
    loss = float(_nll_from_rows(rows, actions, rho_op, state.beta_op_hat)[0])
    grad = grad_from_rows(rows, actions, rho_op, state.beta_op_hat)
    if math.isnan(grad):
        raise DivergenceError("NaN likelihood gradient")
    step = state.alpha2 / math.sqrt(state.round + 1)
    new_beta = state.beta_op_hat + step * grad
    new_beta = min(max(new_beta, -state.BETA_BOUND), state.BETA_BOUND)

    state.loss_history.append(loss)
    state.grad_history.append(grad)
    state.cumulative_loss += loss
    state.round += 1
    state.beta_op_hat = new_beta
    state.beta_trace.append(new_beta)
    state.round_stats.append((rows, np.asarray(actions, dtype=np.int64)))
    return state


def default_u_grid() -> np.ndarray:
    return np.arange(-50.0, 50.0 + 1e-9, 0.25)


def _round_curve(rows: np.ndarray, actions: np.ndarray, rho_op: np.ndarray,
                 u_grid: np.ndarray) -> np.ndarray:
    return _nll_from_rows(rows, actions, rho_op, u_grid)


def _refine_min(eval_total, u_grid: np.ndarray, levels: int = 2) -> float:
    """Grid minimum with two zoom refinements around the best cell."""
    vals = eval_total(u_grid)
    best = float(vals.min())
    centre = float(u_grid[int(vals.argmin())])
    width = float(u_grid[1] - u_grid[0]) if u_grid.size > 1 else 1.0
    for _ in range(levels):
        local = np.linspace(centre - width, centre + width, 21)
        vals = eval_total(local)
        best = min(best, float(vals.min()))
        centre = float(local[int(vals.argmin())])
        width = float(local[1] - local[0])
    return best


def static_regret(state: EstimatorState, u_grid: np.ndarray | None = None,
                  rho_op: np.ndarray | None = None) -> float:
    """Cumulative loss of the played estimates minus the best fixed
    comparator on the grid (with local refinement)."""
    if state.round == 0:
        raise ValueError("no rounds recorded")
    u_grid = default_u_grid() if u_grid is None else np.asarray(u_grid, dtype=np.float64)
    rho_op = _rho_from_stats(state) if rho_op is None else rho_op

    def total(us: np.ndarray) -> np.ndarray:
        acc = np.zeros(us.size)
        for rows, actions in state.round_stats:
            acc += _round_curve(rows, actions, rho_op, us)
        return acc

    comparator = _refine_min(total, u_grid)
    return max(0.0, state.cumulative_loss - comparator)


@dataclass
class DynamicRegretResult:
    regret: float
    path_length: float
    per_round_optima: np.ndarray


def dynamic_regret(state: EstimatorState,
                   round_grids: list[np.ndarray] | np.ndarray | None = None,
                   rho_op: np.ndarray | None = None) -> DynamicRegretResult:
    """Cumulative loss against per-round comparators, plus the empirical
    squared path length of the per-round grid optima."""
    if state.round == 0:
        raise ValueError("no rounds recorded")
    rho_op = _rho_from_stats(state) if rho_op is None else rho_op
    if round_grids is None:
        round_grids = default_u_grid()
    if isinstance(round_grids, np.ndarray):
        round_grids = [round_grids] * state.round
    if len(round_grids) != state.round:
        raise ValueError("need one comparator grid per round")

    optima = np.empty(state.round)
    best_losses = np.empty(state.round)
    for j, ((rows, actions), grid) in enumerate(zip(state.round_stats, round_grids)):
        vals = _round_curve(rows, actions, rho_op, np.asarray(grid, dtype=np.float64))
        k = int(vals.argmin())
        optima[j] = float(np.asarray(grid)[k])
        best_losses[j] = float(vals[k])
    regret = max(0.0, state.cumulative_loss - float(best_losses.sum()))
    path = float(np.sum(np.diff(optima) ** 2))
    return DynamicRegretResult(regret, path, optima)


def _rho_from_stats(state: EstimatorState) -> np.ndarray:
    if not state.round_stats:
        raise ValueError("no cached round statistics")
    n_op = state.round_stats[0][0].shape[1]
    return np.full(n_op, 1.0 / n_op)
