# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Mirrors kernels/pure.py exactly: same update equations, same splitmix64
stream, same libm exp/log call pattern and summation order, so a seeded run
matches the pure backend bitwise (modulo libm itself being shared).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isinf, log, sqrt, isnan

cnp.import_array()

DEF BETA_ZERO_THRESHOLD = 1e-8
DEF BETA_HAT_BOUND = 1e4


cdef inline cnp.uint64_t _splitmix_next(cnp.uint64_t* state) nogil:
    cdef cnp.uint64_t z
    state[0] = state[0] + <cnp.uint64_t>0x9E3779B97F4A7C15
    z = state[0]
    z = (z ^ (z >> 30)) * <cnp.uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <cnp.uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _next_double(cnp.uint64_t* state) nogil:
    return <double>(_splitmix_next(state) >> 11) * (2.0 ** -53)


cdef double _lse(const double* values, const double* weights, Py_ssize_t n, double beta) nogil:
    cdef Py_ssize_t i
    cdef double m, x, acc, lo, hi
    if n == 1:
        return values[0]
    lo = values[0]
    hi = values[0]
    for i in range(1, n):
        if values[i] < lo:
            lo = values[i]
        if values[i] > hi:
            hi = values[i]
    if isinf(beta):
        return hi if beta > 0 else lo
    if fabs(beta) < BETA_ZERO_THRESHOLD:
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
            acc += weights[i] * exp(beta * values[i] - m)
        acc = (m + log(acc)) / beta
    # Rounding near the zero-threshold can leak just outside the exact
    # envelope; the result is guaranteed to lie in [min v, max v].
    if acc < lo:
        return lo
    if acc > hi:
        return hi
    return acc


cdef void _softmax(const double* scores, const double* weights, Py_ssize_t n,
                   double beta, double* out) nogil:
    cdef Py_ssize_t i, hits
    cdef double best, m, x, total, e
    if isinf(beta):
        best = scores[0]
        if beta > 0:
            for i in range(1, n):
                if scores[i] > best:
                    best = scores[i]
        else:
            for i in range(1, n):
                if scores[i] < best:
                    best = scores[i]
        hits = 0
        for i in range(n):
            if scores[i] == best:
                hits += 1
        for i in range(n):
            out[i] = (1.0 / hits) if scores[i] == best else 0.0
        return
    if fabs(beta) < BETA_ZERO_THRESHOLD:
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
        e = weights[i] * exp(beta * scores[i] - m)
        out[i] = e
        total += e
    for i in range(n):
        out[i] /= total


cdef inline int _sample(const double* probs, Py_ssize_t n, double u) nogil:
    cdef Py_ssize_t i
    cdef double cum = 0.0
    for i in range(n - 1):
        cum += probs[i]
        if u < cum:
            return <int>i
    return <int>(n - 1)


def lse_beta(values, weights, double beta):
    """(1/beta) * log sum_i w_i exp(beta * v_i); see kernels.pure.lse_beta."""
    cdef cnp.ndarray[double, ndim=1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    _validate(v, w, beta)
    return _lse(<double*>v.data, <double*>w.data, v.shape[0], beta)


def softmax_weighted(scores, weights, double beta):
    """Normalised w_i * exp(beta * s_i); see kernels.pure.softmax_weighted."""
    cdef cnp.ndarray[double, ndim=1] v = np.ascontiguousarray(scores, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    _validate(v, w, beta)
    cdef cnp.ndarray[double, ndim=1] out = np.empty(v.shape[0])
    _softmax(<double*>v.data, <double*>w.data, v.shape[0], beta, <double*>out.data)
    return out


cdef _validate(cnp.ndarray[double, ndim=1] v, cnp.ndarray[double, ndim=1] w, double beta):
    cdef Py_ssize_t i
    if v.shape[0] != w.shape[0]:
        raise ValueError("values and weights must be 1-D and the same length")
    if v.shape[0] == 0:
        raise ValueError("values must be non-empty")
    cdef double total = 0.0
    for i in range(v.shape[0]):
        if isnan(v[i]) or isinf(v[i]):
            raise ValueError("values must be finite")
        if w[i] <= 0:
            raise ValueError("weights must be strictly positive")
        total += w[i]
    if isnan(beta):
        raise ValueError("beta must not be NaN")
    if fabs(total - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")


def run_tabular_loop(
    cnp.ndarray[double, ndim=3] q,
    cnp.ndarray[cnp.int64_t, ndim=4] next_states,
    cnp.ndarray[double, ndim=4] next_probs,
    cnp.ndarray[double, ndim=3] rewards,
    cnp.ndarray[cnp.uint8_t, ndim=1] terminal_mask,
    Py_ssize_t start_state,
    double gamma,
    double alpha,
    double beta_pl,
    double beta_op_model,
    double beta_op_actor,
    rho_pl,
    rho_op,
    Py_ssize_t n_episodes,
    Py_ssize_t episode_cap,
    object seed,
    bint learn=True,
    bint estimate=False,
    double alpha2=0.05,
    Py_ssize_t window=512,
    bint alpha2_decay=True,
    long long step_offset=0,
    bint collect_transcript=False,
    double target_beta=float("nan"),
    double target_tol=0.5,
    bint stop_on_hit=False,
    double behavior_beta_pl=float("nan"),
):
    """Compiled twin of kernels.pure.run_tabular_loop (same contract)."""
    cdef Py_ssize_t n_states = q.shape[0]
    cdef Py_ssize_t n_pl = q.shape[1]
    cdef Py_ssize_t n_op = q.shape[2]
    cdef Py_ssize_t support = next_states.shape[3]
    cdef cnp.uint64_t rng_state = <cnp.uint64_t>(int(seed) & ((1 << 64) - 1))

    cdef cnp.ndarray[double, ndim=1] rho_pl_a = np.ascontiguousarray(rho_pl, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] rho_op_a = np.ascontiguousarray(rho_op, dtype=np.float64)
    cdef double* rpl = <double*>rho_pl_a.data
    cdef double* rop = <double*>rho_op_a.data

    cdef cnp.ndarray[double, ndim=1] episode_rewards = np.zeros(n_episodes)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] episode_lengths = np.zeros(n_episodes, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] beta_hat_episodes = np.zeros(n_episodes)

    cdef Py_ssize_t ts_capacity = n_episodes * episode_cap if collect_transcript else 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ts_states = np.zeros(ts_capacity, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ts_aop = np.zeros(ts_capacity, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] episode_offsets = np.zeros(n_episodes + 1, dtype=np.int64)
    cdef Py_ssize_t ts_len = 0

    # Estimator state: window ring, dense counts, opponent-marginal cache.
    cdef double beta_hat = beta_op_model
    cdef cnp.ndarray[cnp.int64_t, ndim=1] win_s = np.zeros(max(window, 1), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] win_a = np.zeros(max(window, 1), dtype=np.int64)
    cdef Py_ssize_t win_fill = 0
    cdef Py_ssize_t win_pos = 0
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cnt_s = np.zeros(n_states, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] cnt_sa = np.zeros((n_states, n_op), dtype=np.int64)
    cdef cnp.ndarray[double, ndim=2] m_table = np.zeros((n_states, n_op))
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] m_valid = np.zeros(n_states, dtype=np.uint8)

    cdef cnp.ndarray[double, ndim=1] marg_pl = np.zeros(n_pl)
    cdef cnp.ndarray[double, ndim=1] pi_pl = np.zeros(n_pl)
    cdef cnp.ndarray[double, ndim=1] pi_op = np.zeros(n_op)
    cdef cnp.ndarray[double, ndim=1] rowbuf = np.zeros(max(n_pl, n_op))

    cdef double* q_d = <double*>q.data
    cdef cnp.int64_t* ns_d = <cnp.int64_t*>next_states.data
    cdef double* np_d = <double*>next_probs.data
    cdef double* rw_d = <double*>rewards.data
    cdef double* m_d = <double*>m_table.data
    cdef double* marg_pl_d = <double*>marg_pl.data
    cdef double* pi_pl_d = <double*>pi_pl.data
    cdef double* pi_op_d = <double*>pi_op.data
    cdef double* row_d = <double*>rowbuf.data

    cdef double bellman_abs_sum = 0.0
    cdef long long total_steps = 0
    cdef long long first_hit_step = -1
    cdef Py_ssize_t episodes_done = 0
    cdef bint stop = False
    cdef bint track_target = not isnan(target_beta)

    cdef double act_beta_pl = beta_pl if isnan(behavior_beta_pl) else behavior_beta_pl
    cdef Py_ssize_t ep, step_i, s, s_next, a, b, k, st, i
    cdef int a_pl, a_op
    cdef double model_beta, r, v_next, delta, u, cum
    cdef double grad, expected, a2, ep_reward
    cdef Py_ssize_t ep_len
    cdef long long step_idx
    cdef cnp.int64_t old_s, old_a

    for ep in range(n_episodes):
        s = start_state
        ep_reward = 0.0
        ep_len = 0
        for step_i in range(episode_cap):
            model_beta = beta_hat if estimate else beta_op_model

            # Player marginal and policy at the model temperature.
            for a in range(n_pl):
                for b in range(n_op):
                    row_d[b] = q_d[(s * n_pl + a) * n_op + b]
                marg_pl_d[a] = _lse(row_d, rop, n_op, model_beta)
            _softmax(marg_pl_d, rpl, n_pl, act_beta_pl, pi_pl_d)
            a_pl = _sample(pi_pl_d, n_pl, _next_double(&rng_state))

            # Opponent marginal (cached: depends on q and beta_pl only).
            if not m_valid[s]:
                for b in range(n_op):
                    for a in range(n_pl):
                        row_d[a] = q_d[(s * n_pl + a) * n_op + b]
                    m_d[s * n_op + b] = _lse(row_d, rpl, n_pl, beta_pl)
                m_valid[s] = 1
            _softmax(m_d + s * n_op, rop, n_op, beta_op_actor, pi_op_d)
            a_op = _sample(pi_op_d, n_op, _next_double(&rng_state))

            if support == 1:
                s_next = ns_d[(s * n_pl + a_pl) * n_op + a_op]
            else:
                u = _next_double(&rng_state)
                cum = 0.0
                s_next = ns_d[((s * n_pl + a_pl) * n_op + a_op) * support + support - 1]
                for k in range(support):
                    cum += np_d[((s * n_pl + a_pl) * n_op + a_op) * support + k]
                    if u < cum:
                        s_next = ns_d[((s * n_pl + a_pl) * n_op + a_op) * support + k]
                        break
            r = rw_d[(s * n_pl + a_pl) * n_op + a_op]

            for a in range(n_pl):
                for b in range(n_op):
                    row_d[b] = q_d[(s_next * n_pl + a) * n_op + b]
                marg_pl_d[a] = _lse(row_d, rop, n_op, model_beta)
            v_next = _lse(marg_pl_d, rpl, n_pl, beta_pl)

            delta = r + gamma * v_next - q_d[(s * n_pl + a_pl) * n_op + a_op]
            bellman_abs_sum += fabs(delta)
            if learn:
                q_d[(s * n_pl + a_pl) * n_op + a_op] += alpha * delta
                m_valid[s] = 0

            if collect_transcript:
                ts_states[ts_len] = s
                ts_aop[ts_len] = a_op
                ts_len += 1

            if estimate:
                if win_fill == window:
                    old_s = win_s[win_pos]
                    old_a = win_a[win_pos]
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
                    if cnt_s[st] == 0:
                        continue
                    if not m_valid[st]:
                        for b in range(n_op):
                            for a in range(n_pl):
                                row_d[a] = q_d[(st * n_pl + a) * n_op + b]
                            m_d[st * n_op + b] = _lse(row_d, rpl, n_pl, beta_pl)
                        m_valid[st] = 1
                    _softmax(m_d + st * n_op, rop, n_op, beta_hat, pi_op_d)
                    expected = 0.0
                    for b in range(n_op):
                        expected += pi_op_d[b] * m_d[st * n_op + b]
                    grad -= cnt_s[st] * expected
                    for b in range(n_op):
                        if cnt_sa[st, b]:
                            grad += cnt_sa[st, b] * m_d[st * n_op + b]
                step_idx = step_offset + total_steps + 1
                a2 = alpha2 / sqrt(<double>step_idx) if alpha2_decay else alpha2
                beta_hat += a2 * grad / win_fill
                if beta_hat > BETA_HAT_BOUND:
                    beta_hat = BETA_HAT_BOUND
                elif beta_hat < -BETA_HAT_BOUND:
                    beta_hat = -BETA_HAT_BOUND
                if first_hit_step < 0 and track_target and fabs(beta_hat - target_beta) < target_tol:
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
            episode_offsets[ep + 1] = ts_len
        if stop:
            break

    if collect_transcript:
        transcript_states = ts_states[:ts_len].copy()
        transcript_aop = ts_aop[:ts_len].copy()
        offsets = episode_offsets[: episodes_done + 1].copy()
    else:
        transcript_states = np.zeros(0, dtype=np.int64)
        transcript_aop = np.zeros(0, dtype=np.int64)
        offsets = np.zeros(1, dtype=np.int64)

    return {
        "episode_rewards": episode_rewards[:episodes_done],
        "episode_lengths": episode_lengths[:episodes_done],
        "beta_hat_episodes": beta_hat_episodes[:episodes_done],
        "beta_hat_final": beta_hat,
        "bellman_abs_sum": bellman_abs_sum,
        "n_steps": total_steps,
        "first_hit_step": first_hit_step,
        "episodes_done": episodes_done,
        "transcript_states": transcript_states,
        "transcript_aop": transcript_aop,
        "episode_offsets": offsets,
    }
