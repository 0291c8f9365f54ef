"""Independent reference implementations used as test oracles.

Everything here is written straight from the defining formulas with scipy /
plain numpy, deliberately sharing no code with the package's own kernels.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp


def soft_lse(values, weights, beta):
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if np.isinf(beta):
        return values.max() if beta > 0 else values.min()
    if beta == 0:
        return float(weights @ values)
    return float(logsumexp(beta * values, b=weights) / beta)


def soft_backup_dense(transition, rewards, gamma, v, beta_pl, beta_op, rho_pl, rho_op):
    """One soft Bellman backup from the nested closed forms, per state."""
    s_count, n_pl, n_op, _ = transition.shape
    out = np.empty(s_count)
    for s in range(s_count):
        q = rewards[s] + gamma * transition[s] @ v
        marg = np.array([soft_lse(q[a], rho_op, beta_op) for a in range(n_pl)])
        out[s] = soft_lse(marg, rho_pl, beta_pl)
    return out


def soft_vi_dense(transition, rewards, gamma, beta_pl, beta_op, rho_pl, rho_op,
                  tol=1e-10, max_iters=100000):
    v = np.zeros(transition.shape[0])
    for _ in range(max_iters):
        nv = soft_backup_dense(transition, rewards, gamma, v, beta_pl, beta_op, rho_pl, rho_op)
        if np.max(np.abs(nv - v)) <= tol:
            return nv
        v = nv
    raise RuntimeError("oracle soft VI did not converge")


def minimax_vi_dense(transition, rewards, gamma, tol=1e-10, max_iters=100000):
    """Pure-strategy maximin value iteration (valid on pure-saddle games)."""
    v = np.zeros(transition.shape[0])
    for _ in range(max_iters):
        q = rewards + gamma * transition @ v
        nv = q.min(axis=2).max(axis=1)
        if np.max(np.abs(nv - v)) <= tol:
            return nv
        v = nv
    raise RuntimeError("oracle minimax VI did not converge")


def maxmax_vi_dense(transition, rewards, gamma, tol=1e-10, max_iters=100000):
    v = np.zeros(transition.shape[0])
    for _ in range(max_iters):
        q = rewards + gamma * transition @ v
        nv = q.max(axis=2).max(axis=1)
        if np.max(np.abs(nv - v)) <= tol:
            return nv
        v = nv
    raise RuntimeError("oracle maxmax VI did not converge")


def uniform_opponent_vi_dense(transition, rewards, gamma, beta_pl, rho_pl, rho_op,
                              tol=1e-12, max_iters=100000):
    """Value iteration against an opponent pinned to its reference policy."""
    v = np.zeros(transition.shape[0])
    for _ in range(max_iters):
        q = rewards + gamma * transition @ v
        q_pl = q @ rho_op
        nv = np.array([soft_lse(q_pl[s], rho_pl, beta_pl) for s in range(len(v))])
        if np.max(np.abs(nv - v)) <= tol:
            return nv
        v = nv
    raise RuntimeError("oracle uniform-opponent VI did not converge")


def has_pure_saddle_everywhere(transition, rewards, gamma, tol=1e-10):
    """True when at the minimax fixed point max_a min_b == min_b max_a in
    every state (a pure saddle point exists per state)."""
    v = minimax_vi_dense(transition, rewards, gamma)
    q = rewards + gamma * transition @ v
    maximin = q.min(axis=2).max(axis=1)
    minimax = q.max(axis=1).min(axis=1)
    return bool(np.all(np.abs(maximin - minimax) < tol))


def brute_policy(scores, weights, beta):
    """Unstabilised softmax, usable for moderate beta * score ranges."""
    scores = np.asarray(scores, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64) * np.exp(beta * scores)
    return w / w.sum()


def central_difference(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def dense_transition(model):
    """Expand a support-form GameModel kernel to dense (S, Apl, Aop, S)."""
    s, apl, aop, k = model.next_states.shape
    dense = np.zeros((s, apl, aop, s))
    for i in range(s):
        for a in range(apl):
            for b in range(aop):
                for j in range(k):
                    dense[i, a, b, model.next_states[i, a, b, j]] += model.next_probs[i, a, b, j]
    return dense
