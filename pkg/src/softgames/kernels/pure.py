"""Pure-Python reference kernels.

These mirror the compiled extension exactly: same update equations, same
splitmix64 RNG, same libm exp/log call pattern, so a run with a given seed
produces the same trajectory on both backends. The compiled module is the
fast path; this module is the always-available fallback.
"""

from __future__ import annotations

import math

import numpy as np

BETA_ZERO_THRESHOLD = 1e-8
BETA_HAT_BOUND = 1e4

_MASK = (1 << 64) - 1


class SplitMix64:
    """Tiny deterministic RNG shared verbatim with the compiled kernel."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return (z ^ (z >> 31)) & _MASK

    def next_double(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53


def lse_beta(values, weights, beta: float) -> float:
    """(1/beta) * log sum_i w_i exp(beta * v_i) with max-subtraction.

    beta = +/-inf selects max/min; |beta| below the zero threshold returns
    the weighted mean (the beta -> 0 limit). Result lies in [min v, max v].
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    _check_lse_args(values, weights, beta)
    return _lse(values.tolist(), weights.tolist(), beta)


def _check_lse_args(values: np.ndarray, weights: np.ndarray, beta: float) -> None:
    if values.ndim != 1 or weights.ndim != 1 or values.shape != weights.shape:
        raise ValueError("values and weights must be 1-D and the same length")
    if values.size == 0:
        raise ValueError("values must be non-empty")
    if np.any(np.isnan(values)) or np.any(np.isinf(values)):
        raise ValueError("values must be finite")
    if math.isnan(beta):
        raise ValueError("beta must not be NaN")
    if np.any(weights <= 0):
        raise ValueError("weights must be strictly positive")
    if abs(float(weights.sum()) - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")


def _lse(values: list, weights: list, beta: float) -> float:
    n = len(values)
    if n == 1:
        return values[0]
    lo = min(values)
    hi = max(values)
    if math.isinf(beta):
        return hi if beta > 0 else lo
    if abs(beta) < BETA_ZERO_THRESHOLD:
        acc = 0.0
        for i in range(n):
            acc += weights[i] * values[i]
    else:
        m = beta * values[0]
        for i in range(1, n):
            x = beta * values[i]
            if x > m:
                m = x
        acc = 0.0
        for i in range(n):
            acc += weights[i] * math.exp(beta * values[i] - m)
        acc = (m + math.log(acc)) / beta
    # Rounding near the zero-threshold can leak just outside the exact
    # envelope; the result is guaranteed to lie in [min v, max v].
    if acc < lo:
        return lo
    if acc > hi:
        return hi
    return acc


def softmax_weighted(scores, weights, beta: float) -> np.ndarray:
    """Normalised w_i * exp(beta * s_i); infinite beta splits ties uniformly
    over the exact argmax (beta=+inf) or argmin (beta=-inf) set."""
    scores = np.asarray(scores, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    _check_lse_args(scores, weights, beta)
    out = np.empty(scores.size)
    _softmax(scores.tolist(), weights.tolist(), beta, out)
    return out


def _softmax(scores: list, weights: list, beta: float, out: np.ndarray) -> None:
    n = len(scores)
    if math.isinf(beta):
        best = max(scores) if beta > 0 else min(scores)
        hits = [i for i in range(n) if scores[i] == best]
        out[:] = 0.0
        for i in hits:
            out[i] = 1.0 / len(hits)
        return
    if abs(beta) < BETA_ZERO_THRESHOLD:
        for i in range(n):
            out[i] = weights[i]
        return
    m = beta * scores[0]
    for i in range(1, n):
        x = beta * scores[i]
        if x > m:
            m = x
    total = 0.0
    for i in range(n):
        e = weights[i] * math.exp(beta * scores[i] - m)
        out[i] = e
        total += e
    for i in range(n):
        out[i] /= total


def _sample(probs: list, u: float) -> int:
    cum = 0.0
    last = len(probs) - 1
    for i in range(last):
        cum += probs[i]
        if u < cum:
            return i
    return last


def run_tabular_loop(
    q: np.ndarray,
    next_states: np.ndarray,
    next_probs: np.ndarray,
    rewards: np.ndarray,
    terminal_mask: np.ndarray,
    start_state: int,
    gamma: float,
    alpha: float,
    beta_pl: float,
    beta_op_model: float,
    beta_op_actor: float,
    rho_pl: np.ndarray,
    rho_op: np.ndarray,
    n_episodes: int,
    episode_cap: int,
    seed: int,
    learn: bool = True,
    estimate: bool = False,
    alpha2: float = 0.05,
    window: int = 512,
    alpha2_decay: bool = True,
    step_offset: int = 0,
    collect_transcript: bool = False,
    target_beta: float = math.nan,
    target_tol: float = 0.5,
    stop_on_hit: bool = False,
    behavior_beta_pl: float = math.nan,
) -> dict:
    """Episode loop of the tabular two-player soft Q learner.

    Both agents act from the shared table ``q``: the player softmax-samples
    from its certainty-equivalent marginal at (beta_pl, beta_op_model), the
    opponent from its marginal at beta_op_actor. With ``estimate`` on,
    beta_op_model is the running estimate, updated once per transition from
    a sliding window of (s, a_op) pairs; with it off, beta_op_model stays
    fixed. ``step_offset`` continues the estimator step-size decay across
    chunked calls.

    The TD target is off-policy (the soft value of the current table at the
    model temperatures), so a finite ``behavior_beta_pl`` may soften the
    player's sampling for coverage without changing the fixed point.
    """
    n_pl = q.shape[1]
    n_op = q.shape[2]
    support = next_states.shape[3]
    rng = SplitMix64(seed)

    rho_pl_l = [float(x) for x in rho_pl]
    rho_op_l = [float(x) for x in rho_op]

    episode_rewards = np.zeros(n_episodes)
    episode_lengths = np.zeros(n_episodes, dtype=np.int64)
    beta_hat_episodes = np.zeros(n_episodes)

    ts_states: list[int] = []
    ts_aop: list[int] = []
    episode_offsets = [0]

    # Estimator bookkeeping: ring window plus dense per-state counts and the
    # opponent-marginal table M[s, b] (depends on q and beta_pl only). The
    # gradient sums states in ascending id order so both backends agree
    # bitwise; the O(S) scan per transition is fine at tabular scale.
    n_states = q.shape[0]
    beta_hat = beta_op_model
    win_s = [0] * window
    win_a = [0] * window
    win_fill = 0
    win_pos = 0
    cnt_s = np.zeros(n_states, dtype=np.int64)
    cnt_sa = np.zeros((n_states, n_op), dtype=np.int64)
    m_table: dict[int, list[float]] = {}

    def op_marginal(s: int) -> list[float]:
        row = m_table.get(s)
        if row is None:
            row = [
                _lse([q[s, a, b] for a in range(n_pl)], rho_pl_l, beta_pl)
                for b in range(n_op)
            ]
            m_table[s] = row
        return row

    def pl_marginal(s: int, beta_model: float) -> list[float]:
        return [
            _lse([q[s, a, b] for b in range(n_op)], rho_op_l, beta_model)
            for a in range(n_pl)
        ]

    act_beta_pl = beta_pl if math.isnan(behavior_beta_pl) else behavior_beta_pl
    pi_pl = np.empty(n_pl)
    pi_op = np.empty(n_op)
    bellman_abs_sum = 0.0
    total_steps = 0
    first_hit_step = -1
    episodes_done = 0
    stop = False

    for ep in range(n_episodes):
        s = start_state
        ep_reward = 0.0
        ep_len = 0
        for _ in range(episode_cap):
            model_beta = beta_hat if estimate else beta_op_model
            marg_pl = pl_marginal(s, model_beta)
            _softmax(marg_pl, rho_pl_l, act_beta_pl, pi_pl)
            a_pl = _sample(pi_pl.tolist(), rng.next_double())
            marg_op = op_marginal(s)
            _softmax(marg_op, rho_op_l, beta_op_actor, pi_op)
            a_op = _sample(pi_op.tolist(), rng.next_double())

            if support == 1:
                s_next = int(next_states[s, a_pl, a_op, 0])
            else:
                u = rng.next_double()
                cum = 0.0
                s_next = int(next_states[s, a_pl, a_op, support - 1])
                for k in range(support):
                    cum += next_probs[s, a_pl, a_op, k]
                    if u < cum:
                        s_next = int(next_states[s, a_pl, a_op, k])
                        break
            r = float(rewards[s, a_pl, a_op])

            v_next = _lse(pl_marginal(s_next, model_beta), rho_pl_l, beta_pl)
            delta = r + gamma * v_next - float(q[s, a_pl, a_op])
            bellman_abs_sum += abs(delta)
            if learn:
                q[s, a_pl, a_op] += alpha * delta
                m_table.pop(s, None)

            if collect_transcript:
                ts_states.append(s)
                ts_aop.append(a_op)

            if estimate:
                if win_fill == window:
                    old_s, old_a = win_s[win_pos], win_a[win_pos]
                    cnt_s[old_s] -= 1
                    cnt_sa[old_s, old_a] -= 1
                else:
                    win_fill += 1
                win_s[win_pos] = s
                win_a[win_pos] = a_op
                win_pos = (win_pos + 1) % window
                cnt_s[s] += 1
                cnt_sa[s, a_op] += 1

                grad = 0.0
                for st in range(n_states):
                    c = cnt_s[st]
                    if c == 0:
                        continue
                    row = op_marginal(st)
                    _softmax(row, rho_op_l, beta_hat, pi_op)
                    expected = 0.0
                    for b in range(n_op):
                        expected += pi_op[b] * row[b]
                    grad -= c * expected
                    for b in range(n_op):
                        csa = cnt_sa[st, b]
                        if csa:
                            grad += csa * row[b]
                step_idx = step_offset + total_steps + 1
                a2 = alpha2 / math.sqrt(step_idx) if alpha2_decay else alpha2
                beta_hat += a2 * grad / win_fill
                if beta_hat > BETA_HAT_BOUND:
                    beta_hat = BETA_HAT_BOUND
                elif beta_hat < -BETA_HAT_BOUND:
                    beta_hat = -BETA_HAT_BOUND
                if (
                    first_hit_step < 0
                    and not math.isnan(target_beta)
                    and abs(beta_hat - target_beta) < target_tol
                ):
                    first_hit_step = step_offset + total_steps + 1
                    if stop_on_hit:
                        stop = True

            ep_reward += r
            ep_len += 1
            total_steps += 1
            s = s_next
            if terminal_mask[s] or stop:
                break
        episode_rewards[ep] = ep_reward
        episode_lengths[ep] = ep_len
        beta_hat_episodes[ep] = beta_hat
        episodes_done = ep + 1
        if collect_transcript:
            episode_offsets.append(len(ts_states))
        if stop:
            break

    return {
        "episode_rewards": episode_rewards[:episodes_done],
        "episode_lengths": episode_lengths[:episodes_done],
        "beta_hat_episodes": beta_hat_episodes[:episodes_done],
        "beta_hat_final": beta_hat,
        "bellman_abs_sum": bellman_abs_sum,
        "n_steps": total_steps,
        "first_hit_step": first_hit_step,
        "episodes_done": episodes_done,
        "transcript_states": np.asarray(ts_states, dtype=np.int64),
        "transcript_aop": np.asarray(ts_aop, dtype=np.int64),
        "episode_offsets": np.asarray(episode_offsets, dtype=np.int64),
    }
