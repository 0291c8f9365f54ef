"""Tabular two-player soft Q-learning, with and without opponent estimation.

Environments that expose an explicit game model (grid-world, random games)
run through the fused kernel loop; others (coarse Pong) run through a
generic per-step loop with identical update equations. The fused loop is
chunked at the evaluation cadence so metrics and the estimator bookkeeping
live in Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, soft
from .errors import ConfigError
from .estimator import opponent_score_rows, _nll_from_rows, grad_from_rows
from .types import EstimatorState, JointQ, MetricsRow, RationalityParams


@dataclass
class TrainConfig:
    episodes: int
    params: RationalityParams
    alpha: float = 0.5
    # Per-transition estimator step on the window-mean gradient; constant by
    # default (the decaying 1/sqrt(j) schedule starves long runs).
    alpha2: float = 2.0
    alpha2_decay: bool = False
    window: int = 512
    eval_every: int = 100
    eval_episodes: int = 30
    seed: int = 0
    gamma: float | None = None  # default: the environment's discount
    episode_cap: int | None = None
    # Optional exploratory sampling temperatures; the TD target keeps the
    # params temperatures (the update is off-policy), so these only widen
    # coverage. Ignored in estimation mode (the opponent must act at its
    # true temperature there).
    behavior_beta_pl: float | None = None
    behavior_beta_op: float | None = None
    plateau_evals: int = 50
    plateau_rtol: float = 1e-3
    stop_on_plateau: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if self.alpha2 <= 0:
            raise ConfigError("alpha2 must be positive")
        if self.episodes < 1 or self.eval_every < 1:
            raise ConfigError("episodes and eval_every must be >= 1")


def _is_model_env(env) -> bool:
    return all(hasattr(env, a) for a in ("as_game_model", "terminal_mask", "start_index"))


def _run_chunk(q, model, terminal, env, cfg: TrainConfig, *, n_episodes, seed,
               learn, estimate, beta_op_model, beta_op_actor, step_offset=0,
               collect_transcript=False, target_beta=math.nan, stop_on_hit=False,
               behavior_beta_pl=math.nan):
    gamma = cfg.gamma if cfg.gamma is not None else model.gamma
    cap = cfg.episode_cap if cfg.episode_cap is not None else getattr(env, "episode_cap", 10_000)
    return kernels.run_tabular_loop(
        q.values,
        model.next_states,
        model.next_probs,
        model.rewards,
        terminal,
        int(env.start_index),
        gamma,
        cfg.alpha,
        cfg.params.beta_pl,
        beta_op_model,
        beta_op_actor,
        cfg.params.rho_pl,
        cfg.params.rho_op,
        n_episodes,
        cap,
        seed,
        learn=learn,
        estimate=estimate,
        alpha2=cfg.alpha2,
        window=cfg.window,
        alpha2_decay=cfg.alpha2_decay,
        step_offset=step_offset,
        collect_transcript=collect_transcript,
        target_beta=target_beta,
        target_tol=0.5,
        stop_on_hit=stop_on_hit,
        behavior_beta_pl=behavior_beta_pl,
    )


def _plateaued(errors: list[float], cfg: TrainConfig) -> bool:
    if len(errors) < cfg.plateau_evals:
        return False
    recent = np.asarray(errors[-cfg.plateau_evals:])
    spread = float(recent.max() - recent.min())
    scale = max(abs(float(recent.mean())), 1e-9)
    return spread / scale < cfg.plateau_rtol


def train_tabular(env, cfg: TrainConfig,
                  q0: JointQ | None = None) -> tuple[JointQ, list[MetricsRow]]:
    """Self-play soft Q-learning: both agents sample the closed-form
    policies of the shared table at the configured temperatures. ``q0``
    warm-starts from an existing table (copied, not mutated)."""
    if _is_model_env(env):
        return _train_model_env(env, cfg, estimate=False,
                                beta_hat0=cfg.params.beta_op, q0=q0)[:2]
    q, metrics, _ = _train_generic(env, cfg, q0=q0)
    return q, metrics


def train_tabular_with_estimation(
    env, cfg: TrainConfig, initial_beta_op_hat: float,
    target_beta: float = math.nan, stop_on_hit: bool = False,
) -> tuple[JointQ, EstimatorState, list[MetricsRow]]:
    """Joint learning and estimation: the opponent acts at its hidden true
    temperature (cfg.params.beta_op) while the player's own marginals and
    targets use the running estimate, updated once per transition.

    Passing a finite target_beta tracks the first transition at which the
    estimate entered +/-0.5 of it (EstimatorState.first_hit_step); with
    stop_on_hit the run ends there.
    """
    if not _is_model_env(env):
        raise ConfigError("estimation training requires a tabular model environment")
    q, metrics, est = _train_model_env(
        env, cfg, estimate=True, beta_hat0=initial_beta_op_hat,
        target_beta=target_beta, stop_on_hit=stop_on_hit,
    )
    return q, est, metrics


@dataclass
class _EstBookkeeping:
    state: EstimatorState
    u_grid: np.ndarray = field(default_factory=lambda: np.arange(-50.0, 50.25, 0.25))
    grid_acc: np.ndarray | None = None


def _train_model_env(env, cfg: TrainConfig, estimate: bool, beta_hat0: float,
                     target_beta: float = math.nan, stop_on_hit: bool = False,
                     q0: JointQ | None = None):
    model = env.as_game_model(cfg.gamma)
    terminal = env.terminal_mask()
    q = q0.copy() if q0 is not None else JointQ.zeros(
        model.n_states, model.n_actions_pl, model.n_actions_op)
    master = kernels.pure.SplitMix64(cfg.seed)

    beta_hat = beta_hat0
    est = EstimatorState(beta_op_hat=beta_hat0, alpha2=cfg.alpha2) if estimate else None
    metrics: list[MetricsRow] = []
    errors: list[float] = []
    episodes_done = 0
    step_offset = 0
    first_hit: int | None = None

    while episodes_done < cfg.episodes:
        n = min(cfg.eval_every, cfg.episodes - episodes_done)
        actor_beta_op = cfg.params.beta_op
        act_pl = math.nan
        if not estimate:
            if cfg.behavior_beta_op is not None:
                actor_beta_op = cfg.behavior_beta_op
            if cfg.behavior_beta_pl is not None:
                act_pl = cfg.behavior_beta_pl
        res = _run_chunk(
            q, model, terminal, env, cfg,
            n_episodes=n, seed=master.next_u64(), learn=True,
            estimate=estimate, beta_op_model=beta_hat,
            beta_op_actor=actor_beta_op, step_offset=step_offset,
            collect_transcript=estimate, target_beta=target_beta,
            stop_on_hit=stop_on_hit, behavior_beta_pl=act_pl,
        )
        episodes_done += int(res["episodes_done"])
        step_offset += int(res["n_steps"])
        beta_hat = float(res["beta_hat_final"])
        if estimate and res["first_hit_step"] >= 0 and first_hit is None:
            first_hit = int(res["first_hit_step"])

        if estimate:
            _append_rounds(est, q, cfg.params, res)

        ev = _run_chunk(
            q, model, terminal, env, cfg,
            n_episodes=cfg.eval_episodes, seed=master.next_u64(), learn=False,
            estimate=False, beta_op_model=beta_hat, beta_op_actor=cfg.params.beta_op,
        )
        bellman = float(ev["bellman_abs_sum"]) / max(1, int(ev["n_steps"]))
        metrics.append(
            MetricsRow(
                episode=episodes_done,
                mean_reward=float(np.mean(ev["episode_rewards"])),
                bellman_error=bellman,
                beta_op_hat=beta_hat if estimate else None,
                beta_pl=cfg.params.beta_pl,
            )
        )
        errors.append(bellman)
        if stop_on_hit and first_hit is not None:
            break
        if cfg.stop_on_plateau and _plateaued(errors, cfg):
            break

    if est is not None:
        est.beta_op_hat = beta_hat
        est.first_hit_step = first_hit
    return q, metrics, est


def _append_rounds(est: EstimatorState, q: JointQ, params: RationalityParams, res) -> None:
    """Fold a chunk's transcript into per-episode estimator rounds.

    Round losses are evaluated under the chunk-end table (the per-step
    estimate inside the kernel used the evolving table; this bookkeeping is
    the diagnostic view of the same data).
    """
    states = res["transcript_states"]
    aops = res["transcript_aop"]
    offsets = res["episode_offsets"]
    betas = res["beta_hat_episodes"]
    if states.size == 0:
        return
    uniq, inverse = np.unique(states, return_inverse=True)
    rows_uniq = soft.lse_beta_axis(q.values[uniq], params.rho_pl, params.beta_pl, axis=1)
    all_rows = rows_uniq[inverse]
    for j in range(len(offsets) - 1):
        lo, hi = int(offsets[j]), int(offsets[j + 1])
        if hi <= lo:
            continue
        rows = all_rows[lo:hi]
        actions = aops[lo:hi]
        beta_j = float(betas[j])
        loss = float(_nll_from_rows(rows, actions, params.rho_op, beta_j)[0])
        grad = grad_from_rows(rows, actions, params.rho_op, beta_j)
        est.loss_history.append(loss)
        est.grad_history.append(grad)
        est.cumulative_loss += loss
        est.beta_trace.append(beta_j)
        est.round_stats.append((rows, actions.copy()))
        est.round += 1


def _policies_at(qv: np.ndarray, s: int, params: RationalityParams,
                 beta_op_model: float, beta_op_actor: float,
                 act_beta_pl: float | None = None):
    mat = qv[s]
    marg_pl = soft.lse_beta_axis(mat, params.rho_op, beta_op_model, axis=1)
    sample_beta = params.beta_pl if act_beta_pl is None else act_beta_pl
    pi_pl = soft.softmax_weighted_axis(marg_pl, params.rho_pl, sample_beta)
    marg_op = soft.lse_beta_axis(mat, params.rho_pl, params.beta_pl, axis=0)
    pi_op = soft.softmax_weighted_axis(marg_op, params.rho_op, beta_op_actor)
    return pi_pl, pi_op


def _train_generic(env, cfg: TrainConfig, q0: JointQ | None = None):
    """Per-step loop for environments without an explicit model."""
    gamma = cfg.gamma if cfg.gamma is not None else env.gamma
    cap = cfg.episode_cap if cfg.episode_cap is not None else env.episode_cap
    n_states = env.n_tabular_states
    q = q0.copy() if q0 is not None else JointQ.zeros(
        n_states, env.n_actions_pl, env.n_actions_op)
    rng = np.random.default_rng(cfg.seed)
    params = cfg.params
    metrics: list[MetricsRow] = []
    errors: list[float] = []
    transcript: list[tuple[int, int, int]] = []

    actor_beta_op = params.beta_op if cfg.behavior_beta_op is None else cfg.behavior_beta_op
    for ep in range(cfg.episodes):
        state = env.reset(seed=int(rng.integers(0, 2**63 - 1)))
        s = env.encode(state)
        for _ in range(cap):
            pi_pl, pi_op = _policies_at(q.values, s, params, params.beta_op,
                                        actor_beta_op, cfg.behavior_beta_pl)
            a_pl = soft.sample_action(pi_pl, rng)
            a_op = soft.sample_action(pi_op, rng)
            out = env.step(a_pl, a_op)
            if out.terminal and out.info != "timeout":
                s_next = env.absorbing_state
            else:
                s_next = env.encode(out.next_state)
            marg_next = soft.lse_beta_axis(q.values[s_next], params.rho_op, params.beta_op, axis=1)
            v_next = soft.soft_value_from_marginal(marg_next, params)
            entry = q.values[s, a_pl, a_op]
            q.values[s, a_pl, a_op] = entry + cfg.alpha * (out.reward_pl + gamma * v_next - entry)
            transcript.append((s, a_pl, a_op))
            s = s_next
            if out.terminal:
                break
        if (ep + 1) % cfg.eval_every == 0 or ep + 1 == cfg.episodes:
            mr, be = evaluate(env, q, params, cfg.eval_episodes,
                              seed=int(rng.integers(0, 2**63 - 1)), gamma=gamma,
                              episode_cap=cap)
            metrics.append(MetricsRow(ep + 1, mr, be, None, params.beta_pl))
            errors.append(be)
            if cfg.stop_on_plateau and _plateaued(errors, cfg):
                break
    return q, metrics, transcript


def evaluate(env, q: JointQ, params: RationalityParams, n_episodes: int,
             seed: int = 0, gamma: float | None = None,
             episode_cap: int | None = None) -> tuple[float, float]:
    """Mean episode reward and mean absolute soft-Bellman residual over
    played transitions; no learning side effects."""
    if _is_model_env(env) and q.values.shape[0] == env.as_game_model().n_states:
        model = env.as_game_model(gamma)
        cfg = TrainConfig(episodes=max(1, n_episodes), params=params, alpha=1.0,
                          eval_episodes=n_episodes, seed=seed, gamma=gamma,
                          episode_cap=episode_cap)
        res = _run_chunk(q, model, env.terminal_mask(), env, cfg,
                         n_episodes=n_episodes, seed=seed, learn=False,
                         estimate=False, beta_op_model=params.beta_op,
                         beta_op_actor=params.beta_op)
        return (
            float(np.mean(res["episode_rewards"])),
            float(res["bellman_abs_sum"]) / max(1, int(res["n_steps"])),
        )

    gamma = gamma if gamma is not None else env.gamma
    cap = episode_cap if episode_cap is not None else env.episode_cap
    rng = np.random.default_rng(seed)
    rewards = []
    residuals = []
    for _ in range(n_episodes):
        state = env.reset(seed=int(rng.integers(0, 2**63 - 1)))
        s = env.encode(state)
        total = 0.0
        for _ in range(cap):
            pi_pl, pi_op = _policies_at(q.values, s, params, params.beta_op, params.beta_op)
            a_pl = soft.sample_action(pi_pl, rng)
            a_op = soft.sample_action(pi_op, rng)
            out = env.step(a_pl, a_op)
            s_next = env.absorbing_state if (out.terminal and out.info != "timeout") else env.encode(out.next_state)
            marg_next = soft.lse_beta_axis(q.values[s_next], params.rho_op, params.beta_op, axis=1)
            v_next = soft.soft_value_from_marginal(marg_next, params)
            residuals.append(abs(out.reward_pl + gamma * v_next - q.values[s, a_pl, a_op]))
            total += out.reward_pl
            s = s_next
            if out.terminal:
                break
        rewards.append(total)
    return float(np.mean(rewards)), float(np.mean(residuals))
