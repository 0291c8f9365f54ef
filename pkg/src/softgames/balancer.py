"""Online game balancing: map the opponent-rationality estimate to the
player's temperature via beta_pl = |beta_op_hat| + delta.

During balanced play the joint table stays frozen; only the policies are
re-derived from it at the adapted temperatures, matching a pre-trained
policy source. The estimator's opponent model keeps the player temperature
the source was trained with (that is the process that generated the
opponent's actions), while the live player acts at the balanced one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import soft
from .errors import ConfigError
from .estimator import sgd_step_from_rows
from .types import EstimatorState, JointQ, RationalityParams


@dataclass
class BalanceConfig:
    delta: float = 0.0
    update_every: float = 10
    beta_pl_bounds: tuple[float, float] = (0.1, 100.0)

    def __post_init__(self) -> None:
        lo, hi = self.beta_pl_bounds
        if not lo < hi:
            raise ConfigError("beta_pl_bounds must satisfy lo < hi")
        if not (self.update_every >= 1):
            raise ConfigError("update_every must be >= 1 (math.inf disables updates)")


def balance(beta_op_hat: float, cfg: BalanceConfig) -> float:
    """clamp(|beta_op_hat| + delta, lo, hi)."""
    if math.isinf(beta_op_hat) or math.isnan(beta_op_hat):
        raise ValueError("beta_op_hat must be finite")
    lo, hi = cfg.beta_pl_bounds
    return min(max(abs(beta_op_hat) + cfg.delta, lo), hi)


@dataclass
class BalanceRow:
    episode: int
    beta_op_hat: float
    beta_pl: float
    delta: float
    avg_reward: float
    episode_reward: float

    def as_csv_row(self) -> list[str]:
        return [
            str(self.episode),
            repr(float(self.beta_op_hat)),
            repr(float(self.beta_pl)),
            repr(float(self.delta)),
            repr(float(self.avg_reward)),
        ]


BALANCE_HEADER = ["episode", "beta_op_hat", "beta_pl", "delta", "avg_reward"]


def balanced_play(
    env,
    q: JointQ,
    estimator: EstimatorState,
    cfg: BalanceConfig,
    episodes: int,
    opponent_params: RationalityParams,
    seed: int = 0,
    initial_beta_pl: float | None = None,
) -> list[BalanceRow]:
    """Play episodes against the frozen opponent policy while estimating its
    temperature and refreshing beta_pl every update_every episodes.

    The opponent samples pi_op(q; opponent_params); the player samples
    pi_pl(q; beta_pl, beta_op_hat). update_every = math.inf freezes beta_pl
    at its initial value (the no-balancing baseline).
    """
    rng = np.random.default_rng(seed)
    params = opponent_params
    qv = q.values
    pi_op_cache: dict[int, np.ndarray] = {}
    beta_pl = balance(estimator.beta_op_hat, cfg) if initial_beta_pl is None else initial_beta_pl
    rows_out: list[BalanceRow] = []
    reward_sum = 0.0

    for ep in range(1, episodes + 1):
        beta_pl_used = beta_pl
        state = env.reset(seed=int(rng.integers(0, 2**63 - 1)))
        s = env.encode(state)
        ep_states: list[int] = []
        ep_aops: list[int] = []
        total = 0.0
        for _ in range(env.episode_cap):
            mat = qv[s]
            marg_pl = soft.lse_beta_axis(mat, params.rho_op, estimator.beta_op_hat, axis=1)
            pi_pl = soft.softmax_weighted_axis(marg_pl, params.rho_pl, beta_pl)
            pi_op = pi_op_cache.get(s)
            if pi_op is None:
                marg_op = soft.lse_beta_axis(mat, params.rho_pl, params.beta_pl, axis=0)
                pi_op = soft.softmax_weighted_axis(marg_op, params.rho_op, params.beta_op)
                pi_op_cache[s] = pi_op
            a_pl = soft.sample_action(pi_pl, rng)
            a_op = soft.sample_action(pi_op, rng)
            ep_states.append(s)
            ep_aops.append(a_op)
            out = env.step(a_pl, a_op)
            total += out.reward_pl
            if out.terminal:
                break
            s = env.encode(out.next_state)

        # Per-round estimator update on this episode's opponent actions,
        # with marginals under the source's own player temperature.
        uniq, inverse = np.unique(np.asarray(ep_states, dtype=np.int64), return_inverse=True)
        score_rows = soft.lse_beta_axis(qv[uniq], params.rho_pl, params.beta_pl, axis=1)[inverse]
        sgd_step_from_rows(estimator, score_rows, np.asarray(ep_aops, dtype=np.int64), params.rho_op)

        if math.isfinite(cfg.update_every) and ep % int(cfg.update_every) == 0:
            beta_pl = balance(estimator.beta_op_hat, cfg)

        reward_sum += total
        # The row reports the temperature that was in effect during the
        # episode (the refresh above applies from the next episode on).
        rows_out.append(
            BalanceRow(ep, estimator.beta_op_hat, beta_pl_used, cfg.delta, reward_sum / ep, total)
        )
    return rows_out
