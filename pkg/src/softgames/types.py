"""Shared domain types for tabular two-player soft games.

Transition kernels are stored in support form: ``next_states[s, a, b, k]``
lists the reachable successors and ``next_probs`` their probabilities.
Deterministic games use support size 1; dense kernels use support size S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

PROB_ATOL = 1e-12


def _check_prob_vector(p: np.ndarray, name: str, strict_positive: bool = False) -> None:
    if np.any(np.isnan(p)) or np.any(p < 0):
        raise ConfigError(f"{name} must be a non-negative probability vector")
    if strict_positive and np.any(p <= 0):
        raise ConfigError(f"{name} must be strictly positive")
    total = float(p.sum())
    if abs(total - 1.0) > max(PROB_ATOL, PROB_ATOL * p.size):
        raise ConfigError(f"{name} must sum to 1 (got {total!r})")


@dataclass
class GameModel:
    """Explicit tabular two-player simultaneous-move game.

    rewards:      (S, A_pl, A_op) player reward
    next_states:  (S, A_pl, A_op, K) successor state ids
    next_probs:   (S, A_pl, A_op, K) successor probabilities (rows sum to 1)
    """

    n_states: int
    n_actions_pl: int
    n_actions_op: int
    rewards: np.ndarray
    next_states: np.ndarray
    next_probs: np.ndarray
    gamma: float

    def __post_init__(self) -> None:
        shape = (self.n_states, self.n_actions_pl, self.n_actions_op)
        self.rewards = np.ascontiguousarray(self.rewards, dtype=np.float64)
        self.next_states = np.ascontiguousarray(self.next_states, dtype=np.int64)
        self.next_probs = np.ascontiguousarray(self.next_probs, dtype=np.float64)
        if self.rewards.shape != shape:
            raise ConfigError(f"rewards shape {self.rewards.shape} != {shape}")
        if self.next_states.shape[:3] != shape or self.next_probs.shape != self.next_states.shape:
            raise ConfigError("transition arrays do not match the game shape")
        if not np.all(np.isfinite(self.rewards)):
            raise ConfigError("rewards must be finite")
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if np.any(self.next_probs < 0) or np.any(np.isnan(self.next_probs)):
            raise ConfigError("transition probabilities must be non-negative")
        sums = self.next_probs.sum(axis=-1)
        if np.max(np.abs(sums - 1.0)) > 1e-12 * max(1, self.support):
            raise ConfigError("each transition probability vector must sum to 1")
        if self.next_states.min() < 0 or self.next_states.max() >= self.n_states:
            raise ConfigError("next_states contains out-of-range state ids")

    @property
    def support(self) -> int:
        return self.next_states.shape[3]

    @classmethod
    def from_dense(
        cls, transition: np.ndarray, rewards: np.ndarray, gamma: float
    ) -> "GameModel":
        """Build from a dense (S, A_pl, A_op, S) transition kernel."""
        transition = np.asarray(transition, dtype=np.float64)
        s, apl, aop, s2 = transition.shape
        if s != s2:
            raise ConfigError("dense kernel must be (S, A_pl, A_op, S)")
        idx = np.broadcast_to(np.arange(s, dtype=np.int64), transition.shape).copy()
        return cls(s, apl, aop, rewards, idx, transition, gamma)

    def expected_next_value(self, values: np.ndarray) -> np.ndarray:
        """E[v(s') | s, a_pl, a_op] as an (S, A_pl, A_op) array."""
        return np.einsum("sabk,sabk->sab", self.next_probs, values[self.next_states])


@dataclass
class RationalityParams:
    """Per-agent inverse-temperature pair plus reference policies.

    ``beta_pl``/``beta_op`` may be any finite real or the +/-inf sentinels;
    the sentinels are only legal in limit-mode operators (max/min, argmax
    tie-splitting), never in finite arithmetic.
    """

    beta_pl: float
    beta_op: float
    rho_pl: np.ndarray
    rho_op: np.ndarray

    def __post_init__(self) -> None:
        self.rho_pl = np.ascontiguousarray(self.rho_pl, dtype=np.float64)
        self.rho_op = np.ascontiguousarray(self.rho_op, dtype=np.float64)
        for beta in (self.beta_pl, self.beta_op):
            if math.isnan(beta):
                raise ConfigError("rationality parameters must not be NaN")
        _check_prob_vector(self.rho_pl, "rho_pl", strict_positive=True)
        _check_prob_vector(self.rho_op, "rho_op", strict_positive=True)

    @classmethod
    def uniform(
        cls, n_actions_pl: int, n_actions_op: int, beta_pl: float, beta_op: float
    ) -> "RationalityParams":
        return cls(
            beta_pl=beta_pl,
            beta_op=beta_op,
            rho_pl=np.full(n_actions_pl, 1.0 / n_actions_pl),
            rho_op=np.full(n_actions_op, 1.0 / n_actions_op),
        )

    def with_beta_op(self, beta_op: float) -> "RationalityParams":
        return RationalityParams(self.beta_pl, beta_op, self.rho_pl, self.rho_op)

    def with_beta_pl(self, beta_pl: float) -> "RationalityParams":
        return RationalityParams(beta_pl, self.beta_op, self.rho_pl, self.rho_op)


@dataclass
class JointQ:
    """Dense (state, player action, opponent action) soft Q table."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ConfigError("JointQ values must be a (S, A_pl, A_op) array")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("JointQ values must be finite")

    @classmethod
    def zeros(cls, n_states: int, n_actions_pl: int, n_actions_op: int) -> "JointQ":
        return cls(np.zeros((n_states, n_actions_pl, n_actions_op)))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape  # type: ignore[return-value]

    def copy(self) -> "JointQ":
        return JointQ(self.values.copy())


@dataclass
class SoftValue:
    """Per-state soft value vector (a Bellman-operator iterate or fixed point)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ConfigError("SoftValue must be a 1-D state vector")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("SoftValue entries must be finite")

    @classmethod
    def zeros(cls, n_states: int) -> "SoftValue":
        return cls(np.zeros(n_states))


@dataclass
class PolicyTable:
    """Per-state action distribution for one agent ('player' or 'opponent')."""

    probs: np.ndarray
    owner: str

    def __post_init__(self) -> None:
        if self.owner not in ("player", "opponent"):
            raise ConfigError("owner must be 'player' or 'opponent'")
        self.probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2:
            raise ConfigError("PolicyTable must be a (S, A) array")
        if np.any(self.probs < 0) or np.any(np.isnan(self.probs)):
            raise ConfigError("policy rows must be non-negative")
        if np.max(np.abs(self.probs.sum(axis=1) - 1.0)) > 1e-10:
            raise ConfigError("policy rows must sum to 1 within 1e-10")


@dataclass(frozen=True)
class TransitionRecord:
    """One sampled interaction (s, a_pl, a_op, r, s') at step index t."""

    s: int
    a_pl: int
    a_op: int
    r: float
    s_next: int
    t: int = 0


@dataclass
class MetricsRow:
    """One evaluation snapshot emitted during training."""

    episode: int
    mean_reward: float
    bellman_error: float
    beta_op_hat: float | None
    beta_pl: float

    def as_csv_row(self) -> list[str]:
        hat = "" if self.beta_op_hat is None else repr(float(self.beta_op_hat))
        return [
            str(self.episode),
            repr(float(self.mean_reward)),
            repr(float(self.bellman_error)),
            hat,
            repr(float(self.beta_pl)),
        ]


METRICS_HEADER = ["episode", "mean_reward", "bellman_error", "beta_op_hat", "beta_pl"]


@dataclass
class StepOutcome:
    """Environment step result; ``info`` is one of
    none|blocked|scored_pl|scored_op|picked_up|timeout."""

    next_state: object
    reward_pl: float
    terminal: bool
    info: str = "none"


@dataclass
class EstimatorState:
    """Online maximum-likelihood state for the opponent rationality estimate."""

    beta_op_hat: float
    alpha2: float = 0.05
    round: int = 0
    cumulative_loss: float = 0.0
    loss_history: list[float] = field(default_factory=list)
    grad_history: list[float] = field(default_factory=list)
    beta_trace: list[float] = field(default_factory=list)
    # Cached per-round sufficient statistics: (qop_rows (m, A_op), actions (m,))
    round_stats: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    # Global transition index at which |estimate - target| first fell inside
    # tolerance, when a recovery target was being tracked.
    first_hit_step: int | None = None

    BETA_BOUND = 1e4

    def __post_init__(self) -> None:
        if abs(self.beta_op_hat) > self.BETA_BOUND:
            raise ConfigError(f"|beta_op_hat| must be <= {self.BETA_BOUND}")
