"""5x6 two-agent blocking grid-world.

Both agents move simultaneously with actions {left, right, up, down,
pick-up}. Agents block each other when targeting the same cell or the
other's pre-move cell (the blocked agent stays put). Every player action
costs -0.02; picking up the object at cell (2, 6) pays +1 and ends the
episode. Coordinates are 1-based (row, col) with row 1 at the top.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..types import GameModel, StepOutcome

ROWS = 5
COLS = 6
N_ACTIONS = 5
LEFT, RIGHT, UP, DOWN, PICKUP = range(N_ACTIONS)
ACTION_NAMES = ("left", "right", "up", "down", "pick-up")
_DELTAS = {LEFT: (0, -1), RIGHT: (0, 1), UP: (-1, 0), DOWN: (1, 0)}

OBJECT_CELL = (2, 6)
START_PL = (5, 1)
# The opponent starts mid-grid: closer to the object than the player (so a
# perfectly rational adversary still camps it first), but far enough that
# blocking softer players requires pursuit rather than sitting on the goal.
START_OP = (3, 3)
STEP_COST = -0.02
PICKUP_REWARD = 1.0
EPISODE_CAP = 200
GAMMA = 0.9

N_POSITION_PAIRS = (ROWS * COLS) ** 2
ABSORBING_STATE = N_POSITION_PAIRS  # index used once the object is gone
N_TABULAR_STATES = N_POSITION_PAIRS + 1


@dataclass(frozen=True)
class GridWorldState:
    pos_pl: tuple[int, int]
    pos_op: tuple[int, int]
    object_present: bool = True
    step_count: int = 0


def _cell_index(pos: tuple[int, int]) -> int:
    return (pos[0] - 1) * COLS + (pos[1] - 1)


def state_index(state: GridWorldState) -> int:
    """Stable tabular id; the post-pickup world maps to the absorbing id."""
    if not state.object_present:
        return ABSORBING_STATE
    return _cell_index(state.pos_pl) * ROWS * COLS + _cell_index(state.pos_op)


def _move_target(pos: tuple[int, int], action: int) -> tuple[int, int]:
    if action == PICKUP:
        return pos
    dr, dc = _DELTAS[action]
    r, c = pos[0] + dr, pos[1] + dc
    if not (1 <= r <= ROWS and 1 <= c <= COLS):
        return pos  # off-grid moves leave the mover in place
    return (r, c)


def gridworld_step(state: GridWorldState, a_pl: int, a_op: int) -> StepOutcome:
    """Deterministic simultaneous-move transition."""
    if not (0 <= a_pl < N_ACTIONS and 0 <= a_op < N_ACTIONS):
        raise ValueError(f"invalid action pair ({a_pl}, {a_op})")

    picked = (
        a_pl == PICKUP and state.object_present and state.pos_pl == OBJECT_CELL
    )

    target_pl = _move_target(state.pos_pl, a_pl)
    target_op = _move_target(state.pos_op, a_op)
    new_pl, new_op = target_pl, target_op
    blocked = False
    if target_pl == target_op:
        new_pl, new_op = state.pos_pl, state.pos_op
        blocked = target_pl != state.pos_pl or target_op != state.pos_op
    else:
        if target_pl == state.pos_op:
            new_pl = state.pos_pl
            blocked = True
        if target_op == state.pos_pl:
            new_op = state.pos_op
            blocked = True

    steps = state.step_count + 1
    if picked:
        next_state = GridWorldState(new_pl, new_op, False, steps)
        return StepOutcome(next_state, PICKUP_REWARD, True, "picked_up")

    next_state = GridWorldState(new_pl, new_op, state.object_present, steps)
    if steps >= EPISODE_CAP:
        return StepOutcome(next_state, STEP_COST, True, "timeout")
    return StepOutcome(next_state, STEP_COST, False, "blocked" if blocked else "none")


class GridWorld:
    """Stateful episode wrapper with tabular ids for the learner."""

    n_actions_pl = N_ACTIONS
    n_actions_op = N_ACTIONS
    n_tabular_states = N_TABULAR_STATES
    absorbing_state = ABSORBING_STATE
    gamma = GAMMA
    episode_cap = EPISODE_CAP

    def __init__(self) -> None:
        self.state = self.initial_state()

    @staticmethod
    def initial_state() -> GridWorldState:
        return GridWorldState(START_PL, START_OP, True, 0)

    def reset(self, seed: int | None = None) -> GridWorldState:
        # The start configuration is fixed; the seed is accepted for
        # interface uniformity with the stochastic environments.
        self.state = self.initial_state()
        return self.state

    def step(self, a_pl: int, a_op: int) -> StepOutcome:
        outcome = gridworld_step(self.state, a_pl, a_op)
        self.state = outcome.next_state
        return outcome

    def encode(self, state: GridWorldState) -> int:
        return state_index(state)

    def as_game_model(self, gamma: float | None = None) -> GameModel:
        """Explicit infinite-horizon tabular game (no episode cap).

        Position pairs with co-located agents are unreachable from any valid
        start; they get self-loops so the index space stays rectangular.
        """
        s_count = N_TABULAR_STATES
        rewards = np.zeros((s_count, N_ACTIONS, N_ACTIONS))
        nxt = np.zeros((s_count, N_ACTIONS, N_ACTIONS, 1), dtype=np.int64)
        for pl_cell in range(ROWS * COLS):
            pos_pl = (pl_cell // COLS + 1, pl_cell % COLS + 1)
            for op_cell in range(ROWS * COLS):
                pos_op = (op_cell // COLS + 1, op_cell % COLS + 1)
                s = pl_cell * ROWS * COLS + op_cell
                if pos_pl == pos_op:
                    nxt[s, :, :, 0] = s
                    continue
                state = GridWorldState(pos_pl, pos_op, True, 0)
                for a in range(N_ACTIONS):
                    for b in range(N_ACTIONS):
                        out = gridworld_step(state, a, b)
                        rewards[s, a, b] = out.reward_pl
                        if out.info == "picked_up":
                            nxt[s, a, b, 0] = ABSORBING_STATE
                        else:
                            nxt[s, a, b, 0] = state_index(out.next_state)
        nxt[ABSORBING_STATE, :, :, 0] = ABSORBING_STATE
        probs = np.ones((s_count, N_ACTIONS, N_ACTIONS, 1))
        return GameModel(
            n_states=s_count,
            n_actions_pl=N_ACTIONS,
            n_actions_op=N_ACTIONS,
            rewards=rewards,
            next_states=nxt,
            next_probs=probs,
            gamma=GAMMA if gamma is None else gamma,
        )

    def terminal_mask(self) -> np.ndarray:
        mask = np.zeros(N_TABULAR_STATES, dtype=np.uint8)
        mask[ABSORBING_STATE] = 1
        return mask

    @property
    def start_index(self) -> int:
        return state_index(self.initial_state())
