"""Self-contained simplified Pong with a 13-dimensional real state.

Court is [-1, 1]^2. The player defends the left goal line (x = -1), the
opponent the right one (x = +1). Both paddles move freely inside their own
x band with the 9-way factored action set {left, stay, right} x {up, stay,
down}. Ball reflection off walls and paddles is specular, so speed
magnitude is conserved exactly; scoring ends the episode (+1 when the ball
exits past the opponent, -1 past the player).

The state vector layout is
  [pl.x, pl.y, pl.vx, pl.vy, op.x, op.y, op.vx, op.vy,
   ball.x, ball.y, ball.vx, ball.vy, time]
with time normalised to [0, 1] by the episode cap.

Physics constants live in PongConfig; the defaults are the documented
desk-scale values. The coarse tabular experiments use a wider paddle and
flatter serves (PongConfig.coarse) because interception at the default
paddle size needs positional precision a 2-bin discretisation cannot
express.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..types import StepOutcome

N_ACTIONS = 9
STATE_DIM = 13
COURT = 1.0
GAMMA = 0.97


@dataclass(frozen=True)
class PongConfig:
    paddle_speed: float = 0.05
    ball_speed: float = 0.03
    paddle_half: float = 0.15
    episode_cap: int = 600
    band_inner: float = 0.6
    band_outer: float = 0.95
    paddle_y_limit: float = 1.0
    serve_angle_lo: float = 0.17
    serve_angle_hi: float = 0.56
    # Discretizer range for the time dimension; a range wider than [0, 1]
    # deliberately collapses time into fewer (or one) coarse bins.
    time_range: tuple[float, float] = (0.0, 1.0)
    # Discretizer half-range for paddle y positions. Widening it moves the
    # coarse bin boundaries inside the paddles' clamped travel, which makes
    # "parked at the clamp" an observable coarse state.
    paddle_y_range: float = 1.0

    @classmethod
    def coarse(cls) -> "PongConfig":
        """Tuning used for coarse tabular play: wider paddle, flatter
        serves, near-fixed paddle planes."""
        return cls(paddle_half=0.35, paddle_y_limit=0.55,
                   band_inner=0.72, band_outer=0.82,
                   serve_angle_lo=0.2, serve_angle_hi=0.6,
                   ball_speed=0.07, episode_cap=400,
                   time_range=(0.0, 4.0))

    @property
    def player_band(self) -> tuple[float, float]:
        return (-self.band_outer, -self.band_inner)

    @property
    def opponent_band(self) -> tuple[float, float]:
        return (self.band_inner, self.band_outer)

    @property
    def player_start_x(self) -> float:
        return -(self.band_inner + self.band_outer) / 2.0

    @property
    def opponent_start_x(self) -> float:
        return (self.band_inner + self.band_outer) / 2.0

    def state_ranges(self) -> np.ndarray:
        """Per-dimension (lo, hi) ranges for the discretizer."""
        ps, bs = self.paddle_speed, self.ball_speed
        py = self.paddle_y_range
        return np.array(
            [(-1, 1), (-py, py), (-ps, ps), (-ps, ps)] * 2
            + [(-1, 1), (-1, 1), (-bs, bs), (-bs, bs)]
            + [self.time_range],
            dtype=np.float64,
        )


DEFAULT_CONFIG = PongConfig()

# Module-level aliases for the documented default constants.
PADDLE_SPEED = DEFAULT_CONFIG.paddle_speed
BALL_SPEED = DEFAULT_CONFIG.ball_speed
PADDLE_HALF = DEFAULT_CONFIG.paddle_half
EPISODE_CAP = DEFAULT_CONFIG.episode_cap


def action_components(action: int) -> tuple[int, int]:
    """Factored (h, v) in {-1, 0, 1}^2 for an action index."""
    if not 0 <= action < N_ACTIONS:
        raise ValueError(f"invalid action {action}")
    return action // 3 - 1, 1 - action % 3


def action_index(h: int, v: int) -> int:
    if h not in (-1, 0, 1) or v not in (-1, 0, 1):
        raise ValueError(f"invalid action components ({h}, {v})")
    return (h + 1) * 3 + (1 - v)


@dataclass(frozen=True)
class PongState:
    pl_x: float
    pl_y: float
    pl_vx: float
    pl_vy: float
    op_x: float
    op_y: float
    op_vx: float
    op_vy: float
    ball_x: float
    ball_y: float
    ball_vx: float
    ball_vy: float
    time: float

    def as_vector(self) -> np.ndarray:
        return np.array(
            [
                self.pl_x, self.pl_y, self.pl_vx, self.pl_vy,
                self.op_x, self.op_y, self.op_vx, self.op_vy,
                self.ball_x, self.ball_y, self.ball_vx, self.ball_vy,
                self.time,
            ]
        )

    @classmethod
    def from_vector(cls, vec) -> "PongState":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (STATE_DIM,):
            raise ValueError(f"expected a {STATE_DIM}-float state vector")
        return cls(*(float(x) for x in vec))


def _move_paddle(x: float, y: float, h: int, v: int, speed: float,
                 band: tuple[float, float], y_limit: float):
    nx = min(max(x + h * speed, band[0]), band[1])
    ny = min(max(y + v * speed, -y_limit), y_limit)
    return nx, ny, nx - x, ny - y


def pong_step(state: PongState, a_pl: int, a_op: int,
              cfg: PongConfig = DEFAULT_CONFIG) -> StepOutcome:
    """One deterministic tick of paddle kinematics and ball flight."""
    h_pl, v_pl = action_components(a_pl)
    h_op, v_op = action_components(a_op)

    pl_x, pl_y, pl_vx, pl_vy = _move_paddle(
        state.pl_x, state.pl_y, h_pl, v_pl, cfg.paddle_speed, cfg.player_band,
        cfg.paddle_y_limit)
    op_x, op_y, op_vx, op_vy = _move_paddle(
        state.op_x, state.op_y, h_op, v_op, cfg.paddle_speed, cfg.opponent_band,
        cfg.paddle_y_limit)

    x0, y0 = state.ball_x, state.ball_y
    bx = x0 + state.ball_vx
    by = y0 + state.ball_vy
    bvx, bvy = state.ball_vx, state.ball_vy

    # Specular wall bounce (ball speed is far below the court size, so one
    # reflection per tick suffices).
    if by > COURT:
        by = 2 * COURT - by
        bvy = -bvy
    elif by < -COURT:
        by = -2 * COURT - by
        bvy = -bvy

    # Paddle planes: reflect when the flight segment crosses the plane
    # within the paddle's reach.
    if bvx < 0 and x0 >= pl_x >= bx:
        t = (pl_x - x0) / (bx - x0)
        y_cross = y0 + t * (by - y0)
        if abs(y_cross - pl_y) <= cfg.paddle_half:
            bx = 2 * pl_x - bx
            bvx = -bvx
    elif bvx > 0 and x0 <= op_x <= bx:
        t = (op_x - x0) / (bx - x0)
        y_cross = y0 + t * (by - y0)
        if abs(y_cross - op_y) <= cfg.paddle_half:
            bx = 2 * op_x - bx
            bvx = -bvx

    tick = round(state.time * cfg.episode_cap) + 1
    next_state = PongState(
        pl_x, pl_y, pl_vx, pl_vy,
        op_x, op_y, op_vx, op_vy,
        bx, by, bvx, bvy,
        tick / cfg.episode_cap,
    )
    if bx > COURT:
        return StepOutcome(next_state, 1.0, True, "scored_pl")
    if bx < -COURT:
        return StepOutcome(next_state, -1.0, True, "scored_op")
    if tick >= cfg.episode_cap:
        return StepOutcome(next_state, 0.0, True, "timeout")
    return StepOutcome(next_state, 0.0, False, "none")


def initial_state(seed: int | None = None, cfg: PongConfig = DEFAULT_CONFIG) -> PongState:
    """Centre serve with a seeded random direction."""
    rng = np.random.default_rng(seed)
    angle = rng.uniform(cfg.serve_angle_lo, cfg.serve_angle_hi)
    toward_player = rng.random() < 0.5
    upward = rng.random() < 0.5
    bvx = cfg.ball_speed * math.cos(angle) * (-1.0 if toward_player else 1.0)
    bvy = cfg.ball_speed * math.sin(angle) * (1.0 if upward else -1.0)
    return PongState(
        cfg.player_start_x, 0.0, 0.0, 0.0,
        cfg.opponent_start_x, 0.0, 0.0, 0.0,
        0.0, 0.0, bvx, bvy,
        0.0,
    )


class PongEnv:
    """Stateful episode wrapper around pong_step."""

    n_actions_pl = N_ACTIONS
    n_actions_op = N_ACTIONS
    gamma = GAMMA

    def __init__(self, seed: int | None = None, cfg: PongConfig = DEFAULT_CONFIG):
        self.cfg = cfg
        self._seed_seq = np.random.default_rng(seed)
        self.state = initial_state(seed, cfg)

    @property
    def episode_cap(self) -> int:
        return self.cfg.episode_cap

    def reset(self, seed: int | None = None) -> PongState:
        if seed is None:
            seed = int(self._seed_seq.integers(0, 2**63 - 1))
        self.state = initial_state(seed, self.cfg)
        return self.state

    def step(self, a_pl: int, a_op: int) -> StepOutcome:
        outcome = pong_step(self.state, a_pl, a_op, self.cfg)
        self.state = outcome.next_state
        return outcome


def discretize_pong(state: PongState, bins_per_dim: int,
                    cfg: PongConfig = DEFAULT_CONFIG) -> int:
    """Stable coarse index in [0, bins_per_dim^13).

    Uniform bins per dimension over the documented state ranges; dimension 0
    is the least-significant digit. Raises on states outside the ranges.
    """
    if bins_per_dim < 2:
        raise ValueError("bins_per_dim must be >= 2")
    ranges = cfg.state_ranges()
    vec = state.as_vector()
    lo = ranges[:, 0]
    hi = ranges[:, 1]
    if np.any(vec < lo - 1e-9) or np.any(vec > hi + 1e-9):
        raise ValueError("state outside the discretizer ranges")
    frac = (vec - lo) / (hi - lo)
    idx_per_dim = np.clip((frac * bins_per_dim).astype(np.int64), 0, bins_per_dim - 1)
    index = 0
    for d in range(STATE_DIM - 1, -1, -1):
        index = index * bins_per_dim + int(idx_per_dim[d])
    return index


def pong_bin_centre(index: int, bins_per_dim: int,
                    cfg: PongConfig = DEFAULT_CONFIG) -> PongState:
    """State at the centre of a coarse cell (inverse of discretize_pong
    on bin centres)."""
    if not 0 <= index < bins_per_dim**STATE_DIM:
        raise ValueError("index out of range")
    ranges = cfg.state_ranges()
    vec = np.empty(STATE_DIM)
    for d in range(STATE_DIM):
        b = index % bins_per_dim
        index //= bins_per_dim
        lo, hi = ranges[d]
        vec[d] = lo + (b + 0.5) * (hi - lo) / bins_per_dim
    return PongState.from_vector(vec)


class CoarsePong:
    """Tabular view of Pong over the coarse discretizer.

    When the raw cell space bins^13 is small (bins = 2) the raw index is
    used directly, so independent processes agree on state ids with no
    shared mapping. Larger bin counts compact visited cells to dense ids on
    first sight; that mapping is part of the learned artifact (persisted
    alongside the Q table).
    """

    IDENTITY_LIMIT = 65_536

    def __init__(self, bins_per_dim: int = 2, seed: int | None = None,
                 max_states: int | None = None,
                 cfg: PongConfig | None = None,
                 identity: bool | None = None):
        self.bins = bins_per_dim
        self.cfg = cfg if cfg is not None else PongConfig.coarse()
        self.env = PongEnv(seed, self.cfg)
        raw_cells = bins_per_dim**STATE_DIM
        if identity is None:
            identity = max_states is None and raw_cells <= self.IDENTITY_LIMIT
        self.identity = identity
        if identity:
            max_states = raw_cells
        elif max_states is None:
            max_states = min(raw_cells, 20_000)
        self.max_states = max_states
        self._compact: dict[int, int] = {}
        self.n_actions_pl = N_ACTIONS
        self.n_actions_op = N_ACTIONS
        self.gamma = GAMMA

    @property
    def episode_cap(self) -> int:
        return self.cfg.episode_cap

    @property
    def n_tabular_states(self) -> int:
        return self.max_states + 1

    @property
    def absorbing_state(self) -> int:
        return self.max_states

    def encode(self, state: PongState) -> int:
        raw = discretize_pong(state, self.bins, self.cfg)
        if self.identity:
            return raw
        compact = self._compact.get(raw)
        if compact is None:
            compact = len(self._compact)
            if compact >= self.max_states:
                raise RuntimeError("coarse state budget exhausted; raise max_states")
            self._compact[raw] = compact
        return compact

    @property
    def n_seen_states(self) -> int:
        return len(self._compact) if not self.identity else self.max_states

    def mapping(self) -> dict[int, int]:
        return dict(self._compact)

    def load_mapping(self, mapping: dict[int, int]) -> None:
        if self.identity:
            raise ValueError("identity-mode coarse envs have no mapping to load")
        self._compact = {int(k): int(v) for k, v in mapping.items()}

    def reset(self, seed: int | None = None) -> PongState:
        return self.env.reset(seed)

    def step(self, a_pl: int, a_op: int) -> StepOutcome:
        return self.env.step(a_pl, a_op)

    @property
    def state(self) -> PongState:
        return self.env.state
