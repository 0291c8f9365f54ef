"""Desk-scale deep two-player soft Q-learning.

A small fully-connected network maps the 13-float state to a matrix of
joint soft Q-values (9 x 9 = 81 outputs for Pong). Training minimises the
squared soft-Bellman residual against a periodically synchronised target
network, sampling minibatches from a ring-buffer replay memory. Everything
is float64 numpy with hand-written backprop so gradients can be checked
against finite differences exactly.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import soft
from .errors import ConfigError, DivergenceError
from .types import MetricsRow, RationalityParams

DEFAULT_SIZES = (13, 100, 100)


@dataclass
class QNetworkParams:
    """ReLU MLP weights; the last layer is linear with n_pl * n_op units."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    n_actions_pl: int
    n_actions_op: int

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigError("weights and biases must be parallel non-empty lists")
        if self.weights[-1].shape[1] != self.n_actions_pl * self.n_actions_op:
            raise ConfigError("output layer width must equal n_actions_pl * n_actions_op")

    @classmethod
    def init(
        cls,
        seed: int,
        hidden: tuple[int, ...] = DEFAULT_SIZES,
        n_actions_pl: int = 9,
        n_actions_op: int = 9,
    ) -> "QNetworkParams":
        """Symmetric uniform fan-in initialisation."""
        rng = np.random.default_rng(seed)
        sizes = list(hidden) + [n_actions_pl * n_actions_op]
        ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            ws.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            bs.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(ws, bs, n_actions_pl, n_actions_op)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "QNetworkParams":
        return QNetworkParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.n_actions_pl,
            self.n_actions_op,
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.weights + self.biases])

    def load_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for arr in self.weights + self.biases:
            arr[...] = vec[pos:pos + arr.size].reshape(arr.shape)
            pos += arr.size


def _forward_cached(params: QNetworkParams, x: np.ndarray):
    """Batch forward pass keeping pre-activations for backprop."""
    acts = [x]
    pre = []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return h, acts, pre


def forward(params: QNetworkParams, state: np.ndarray) -> np.ndarray:
    """Joint Q matrix (n_pl, n_op) for one state vector."""
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (params.input_dim,):
        raise ConfigError(f"expected a {params.input_dim}-float state")
    out, _, _ = _forward_cached(params, state[None, :])
    return out[0].reshape(params.n_actions_pl, params.n_actions_op)


def forward_batch(params: QNetworkParams, states: np.ndarray) -> np.ndarray:
    out, _, _ = _forward_cached(params, np.asarray(states, dtype=np.float64))
    return out.reshape(-1, params.n_actions_pl, params.n_actions_op)


def soft_value_net(params: QNetworkParams, state: np.ndarray,
                   rationality: RationalityParams) -> float:
    """Soft state value of the network's matrix (player-first nesting)."""
    return soft.matrix_value(forward(params, state), rationality)


@dataclass
class TargetParams:
    params: QNetworkParams
    steps_since_sync: int = 0


def sync_target(online: QNetworkParams, target: TargetParams | None = None) -> TargetParams:
    """Deep-copy the online parameters and reset the sync counter."""
    if target is None:
        return TargetParams(online.copy(), 0)
    target.params = online.copy()
    target.steps_since_sync = 0
    return target


class ReplayMemory:
    """Uniform-sampling ring buffer of real-vector transitions."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions_pl = np.zeros(capacity, dtype=np.int64)
        self.actions_op = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.cursor = 0
        self.size = 0

    def push(self, s, a_pl, a_op, r, s_next, done) -> None:
        i = self.cursor
        self.states[i] = s
        self.actions_pl[i] = a_pl
        self.actions_op[i] = a_op
        self.rewards[i] = r
        self.next_states[i] = s_next
        self.done[i] = done
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay memory")
        idx = rng.integers(0, self.size, size=batch_size)
        return (
            self.states[idx],
            self.actions_pl[idx],
            self.actions_op[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.done[idx],
        )


def _batch_soft_values(params: QNetworkParams, states: np.ndarray,
                       rationality: RationalityParams) -> np.ndarray:
    mats = forward_batch(params, states)
    marg = soft.lse_beta_axis(mats, rationality.rho_op, rationality.beta_op, axis=2)
    return soft.lse_beta_axis(marg, rationality.rho_pl, rationality.beta_pl, axis=1)


def loss_batch(params: QNetworkParams, target: TargetParams, batch,
               rationality: RationalityParams, gamma: float):
    """Mean squared soft-Bellman residual and its parameter gradients.

    Terminal transitions bootstrap nothing (target is the reward alone);
    the target-network branch contributes no gradient.
    """
    states, a_pl, a_op, rewards, next_states, done = batch
    b = states.shape[0]
    if b == 0:
        raise ValueError("empty batch")

    v_next = _batch_soft_values(target.params, next_states, rationality)
    y = rewards + gamma * v_next * (~np.asarray(done, dtype=bool))

    out, acts, pre = _forward_cached(params, np.asarray(states, dtype=np.float64))
    flat_idx = np.asarray(a_pl, dtype=np.int64) * params.n_actions_op + np.asarray(a_op, dtype=np.int64)
    q_taken = out[np.arange(b), flat_idx]
    err = q_taken - y
    loss = float(np.mean(err**2))

    d_out = np.zeros_like(out)
    d_out[np.arange(b), flat_idx] = 2.0 * err / b

    grad_w = [np.zeros_like(w) for w in params.weights]
    grad_b = [np.zeros_like(bb) for bb in params.biases]
    delta = d_out
    for i in range(len(params.weights) - 1, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (pre[i - 1] > 0.0)
    return loss, (grad_w, grad_b)


@dataclass
class AdamState:
    """Adaptive moment estimation with the standard bias correction."""

    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: QNetworkParams) -> "AdamState":
        return cls(
            [np.zeros_like(w) for w in params.weights],
            [np.zeros_like(w) for w in params.weights],
            [np.zeros_like(b) for b in params.biases],
            [np.zeros_like(b) for b in params.biases],
        )

    def step(self, params: QNetworkParams, grads, lr: float) -> None:
        grad_w, grad_b = grads
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for i in range(len(params.weights)):
            for arr, g, m, v in (
                (params.weights[i], grad_w[i], self.m_w[i], self.v_w[i]),
                (params.biases[i], grad_b[i], self.m_b[i], self.v_b[i]),
            ):
                m += (1.0 - self.beta1) * (g - m)
                v += (1.0 - self.beta2) * (g * g - v)
                arr -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class DeepConfig:
    steps: int
    rationality: RationalityParams
    batch_size: int = 32
    lr: float = 1e-4
    replay_capacity: int = 50_000
    target_sync: int = 30_000
    warmup: int = 500
    seed: int = 0
    gamma: float | None = None
    eval_every: int = 5_000
    recent_window: int = 20

    def __post_init__(self) -> None:
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError("steps and batch_size must be >= 1")
        if self.lr <= 0 or self.replay_capacity < self.batch_size:
            raise ConfigError("bad lr or replay capacity")


def train_deep(env, cfg: DeepConfig) -> tuple[QNetworkParams, list[MetricsRow]]:
    """Act with the online network's soft policies, store to replay, and
    take one Adam step per environment step after warmup."""
    gamma = cfg.gamma if cfg.gamma is not None else env.gamma
    rng = np.random.default_rng(cfg.seed)
    params = QNetworkParams.init(cfg.seed, n_actions_pl=env.n_actions_pl,
                                 n_actions_op=env.n_actions_op)
    target = sync_target(params)
    replay = ReplayMemory(cfg.replay_capacity, params.input_dim)
    opt = AdamState.for_params(params)
    rat = cfg.rationality

    state = env.reset(seed=int(rng.integers(0, 2**63 - 1)))
    metrics: list[MetricsRow] = []
    episode_rewards: list[float] = []
    ep_reward = 0.0
    recent_losses: list[float] = []

    for step in range(1, cfg.steps + 1):
        vec = state.as_vector()
        mat = forward(params, vec)
        a_pl = soft.sample_action(soft.matrix_policy_player(mat, rat), rng)
        a_op = soft.sample_action(soft.matrix_policy_opponent(mat, rat), rng)
        out = env.step(a_pl, a_op)
        done = out.terminal and out.info != "timeout"
        next_vec = out.next_state.as_vector()
        replay.push(vec, a_pl, a_op, out.reward_pl, next_vec, done)
        ep_reward += out.reward_pl

        if out.terminal:
            episode_rewards.append(ep_reward)
            ep_reward = 0.0
            state = env.reset(seed=int(rng.integers(0, 2**63 - 1)))
        else:
            state = out.next_state

        if replay.size >= max(cfg.warmup, cfg.batch_size):
            batch = replay.sample(cfg.batch_size, rng)
            loss, grads = loss_batch(params, target, batch, rat, gamma)
            if math.isnan(loss):
                raise DivergenceError("deep training loss became NaN")
            opt.step(params, grads, cfg.lr)
            recent_losses.append(loss)
            target.steps_since_sync += 1
            if target.steps_since_sync >= cfg.target_sync:
                sync_target(params, target)

        if step % cfg.eval_every == 0 or step == cfg.steps:
            recent = episode_rewards[-cfg.recent_window:]
            metrics.append(
                MetricsRow(
                    episode=len(episode_rewards),
                    mean_reward=float(np.mean(recent)) if recent else 0.0,
                    bellman_error=float(np.mean(recent_losses[-200:])) if recent_losses else 0.0,
                    beta_op_hat=None,
                    beta_pl=rat.beta_pl,
                )
            )
    return params, metrics


def evaluate_deep(env, params: QNetworkParams, rationality: RationalityParams,
                  n_episodes: int, seed: int = 0) -> float:
    """Mean episode reward under the network's soft policies."""
    rng = np.random.default_rng(seed)
    totals = []
    for _ in range(n_episodes):
        state = env.reset(seed=int(rng.integers(0, 2**63 - 1)))
        total = 0.0
        for _ in range(env.episode_cap):
            mat = forward(params, state.as_vector())
            a_pl = soft.sample_action(soft.matrix_policy_player(mat, rationality), rng)
            a_op = soft.sample_action(soft.matrix_policy_opponent(mat, rationality), rng)
            out = env.step(a_pl, a_op)
            total += out.reward_pl
            if out.terminal:
                break
            state = out.next_state
        totals.append(total)
    return float(np.mean(totals))


def save_network(params: QNetworkParams, path: str, seed: int = 0, step: int = 0,
                 extra: dict | None = None) -> None:
    """JSON manifest plus a sidecar binary of little-endian float64 arrays."""
    bin_path = path + ".bin"
    arrays = []
    offset = 0
    blobs = []
    for kind, lst in (("W", params.weights), ("b", params.biases)):
        for i, arr in enumerate(lst):
            data = np.ascontiguousarray(arr, dtype="<f8")
            arrays.append({"name": f"{kind}{i}", "shape": list(arr.shape), "offset": offset})
            blobs.append(data.tobytes())
            offset += data.nbytes
    manifest = {
        "version": 1,
        "kind": "network",
        "layers": [list(w.shape) for w in params.weights],
        "n_actions_pl": params.n_actions_pl,
        "n_actions_op": params.n_actions_op,
        "seed": seed,
        "step": step,
        "weights_file": os.path.basename(bin_path),
        "arrays": arrays,
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh)
    with open(bin_path, "wb") as fh:
        fh.write(b"".join(blobs))


def load_network(path: str) -> tuple[QNetworkParams, dict]:
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("kind") != "network" or manifest.get("version") != 1:
        raise ConfigError(f"{path} is not a network checkpoint")
    bin_path = os.path.join(os.path.dirname(path) or ".", manifest["weights_file"])
    raw = open(bin_path, "rb").read()
    n_layers = len(manifest["layers"])
    arrays = {}
    for spec in manifest["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=spec["offset"])
        arrays[spec["name"]] = arr.reshape(shape).astype(np.float64)
    params = QNetworkParams(
        [arrays[f"W{i}"] for i in range(n_layers)],
        [arrays[f"b{i}"] for i in range(n_layers)],
        manifest["n_actions_pl"],
        manifest["n_actions_op"],
    )
    return params, manifest
