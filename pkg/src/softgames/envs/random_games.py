"""Seeded random tabular games for tests, sweeps and the CLI."""

from __future__ import annotations

import numpy as np

from ..types import GameModel


def random_game(
    seed: int,
    n_states: int = 4,
    n_actions_pl: int = 2,
    n_actions_op: int = 2,
    gamma: float = 0.9,
    reward_scale: float = 1.0,
    deterministic: bool = False,
) -> GameModel:
    """Seeded random game: dense kernel by default, or a deterministic one
    (a single uniformly drawn successor per joint action)."""
    rng = np.random.default_rng(seed)
    shape = (n_states, n_actions_pl, n_actions_op)
    rewards = rng.uniform(-reward_scale, reward_scale, size=shape)
    if deterministic:
        nxt = rng.integers(0, n_states, size=shape + (1,)).astype(np.int64)
        return GameModel(n_states, n_actions_pl, n_actions_op, rewards,
                         nxt, np.ones(shape + (1,)), gamma)
    kernel = rng.random(shape + (n_states,)) + 1e-3
    kernel /= kernel.sum(axis=-1, keepdims=True)
    return GameModel.from_dense(kernel, rewards, gamma)


class GameModelEnv:
    """Episode wrapper that samples transitions from an explicit GameModel."""

    def __init__(self, model: GameModel, start_state: int = 0,
                 episode_cap: int = 50, seed: int | None = None,
                 terminal_mask: np.ndarray | None = None):
        self.model = model
        self.start_state = start_state
        self.episode_cap = episode_cap
        self.gamma = model.gamma
        self.n_actions_pl = model.n_actions_pl
        self.n_actions_op = model.n_actions_op
        self.n_tabular_states = model.n_states
        self._terminal = (
            terminal_mask if terminal_mask is not None
            else np.zeros(model.n_states, dtype=np.uint8)
        )
        self.absorbing_state = -1
        self.rng = np.random.default_rng(seed)
        self.state = start_state
        self._steps = 0

    def reset(self, seed: int | None = None) -> int:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.state = self.start_state
        self._steps = 0
        return self.state

    def encode(self, state: int) -> int:
        return int(state)

    def terminal_mask(self) -> np.ndarray:
        return self._terminal

    def as_game_model(self, gamma: float | None = None) -> GameModel:
        return self.model

    @property
    def start_index(self) -> int:
        return self.start_state

    def step(self, a_pl: int, a_op: int):
        from ..types import StepOutcome

        probs = self.model.next_probs[self.state, a_pl, a_op]
        nxt_ids = self.model.next_states[self.state, a_pl, a_op]
        k = int(self.rng.choice(probs.size, p=probs / probs.sum()))
        s_next = int(nxt_ids[k])
        r = float(self.model.rewards[self.state, a_pl, a_op])
        self.state = s_next
        self._steps += 1
        terminal = bool(self._terminal[s_next]) or self._steps >= self.episode_cap
        info = "timeout" if (self._steps >= self.episode_cap and not self._terminal[s_next]) else "none"
        return StepOutcome(s_next, r, terminal, info)
