"""Real-time play service: a human (or scripted client) acts as the
opponent over a WebSocket while the agent plays from a frozen policy
source, the estimator infers the opponent's temperature from its actions,
and the balancer adapts the agent's own temperature each episode.

Protocol (JSON text frames, schema version 1):
  server -> client  {"v":1,"type":"state","tick":int,"state":[13 floats],
                     "beta_op_hat":float,"beta_pl":float,
                     "score":[player,opponent],"terminal":bool}
  client -> server  {"type":"action","h":-1|0|1,"v":-1|0|1}
                    {"type":"config","delta":float}
                    {"type":"reset"}
(The action message's "v" field is the vertical axis in screen convention,
-1 = up; on the other message types an optional "v" field is the schema
version and must equal 1.)

The latest action is held until replaced. tick_rate > 0 advances the game
on a timer whether or not the client speaks; tick_rate = 0 is lockstep
mode (one tick per received message), used by scripted clients and tests.
"""

from __future__ import annotations

import asyncio
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import deep as deep_mod
from . import soft
from .balancer import BalanceConfig, balance
from .checkpoint import checkpoint_kind, load_joint_q
from .envs import CoarsePong, PongConfig, action_index
from .errors import ConfigError
from .estimator import sgd_step_from_rows
from .types import EstimatorState, JointQ, RationalityParams

PROTOCOL_VERSION = 1
PROTOCOL_ERROR_CLOSE = 1002

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>softgames</title></head>
<body><h1>softgames play server</h1>
<p>No UI bundle found. Build the frontend (see frontend/README) or connect
a WebSocket client to <code>/ws</code>.</p></body></html>
"""


class TabularSource:
    """Frozen joint-Q policy source over coarse Pong states."""

    def __init__(self, q: JointQ, coarse: CoarsePong, model_params: RationalityParams):
        self.q = q
        self.coarse = coarse
        self.model_params = model_params

    def matrix(self, state) -> np.ndarray:
        s = self.coarse.encode(state)
        if s >= self.q.values.shape[0]:
            return np.zeros(self.q.values.shape[1:])
        return self.q.values[s]


class NetworkSource:
    """Frozen network policy source over raw 13-float states."""

    def __init__(self, params: deep_mod.QNetworkParams, model_params: RationalityParams):
        self.params = params
        self.model_params = model_params

    def matrix(self, state) -> np.ndarray:
        return deep_mod.forward(self.params, state.as_vector())


@dataclass
class ServerSettings:
    checkpoint: str
    mapping: str | None = None
    bins: int = 2
    beta_pl_model: float = 50.0
    beta_op_model: float = -20.0
    delta: float = 0.0
    tick_rate: float = 30.0
    alpha2: float = 0.5
    initial_beta_op_hat: float = 0.0
    ui_dir: str | None = None
    pong: PongConfig = field(default_factory=PongConfig.coarse)

    @classmethod
    def from_config(cls, cfg: dict) -> "ServerSettings":
        return cls(
            checkpoint=cfg["checkpoint"],
            mapping=cfg.get("mapping"),
            bins=int(cfg.get("bins", 2)),
            beta_pl_model=float(cfg.get("beta_pl_model", 50.0)),
            beta_op_model=float(cfg.get("beta_op_model", -20.0)),
            delta=float(cfg.get("delta", 0.0)),
            tick_rate=float(cfg.get("tick_rate", 30.0)),
            ui_dir=cfg.get("ui_dir"),
        )


def load_policy_source(settings: ServerSettings):
    kind = checkpoint_kind(settings.checkpoint)
    model_params = RationalityParams.uniform(
        9, 9, settings.beta_pl_model, settings.beta_op_model
    )
    if kind == "joint_q":
        q, _ = load_joint_q(settings.checkpoint)
        raw_cells = settings.bins ** 13
        if q.values.shape[0] == raw_cells + 1:
            coarse = CoarsePong(bins_per_dim=settings.bins, cfg=settings.pong)
        else:
            coarse = CoarsePong(bins_per_dim=settings.bins, cfg=settings.pong,
                                max_states=max(q.values.shape[0] - 1, 1),
                                identity=False)
            if settings.mapping:
                with open(settings.mapping, encoding="utf-8") as fh:
                    coarse.load_mapping({int(k): v for k, v in json.load(fh).items()})
        return TabularSource(q, coarse, model_params)
    if kind == "network":
        params, _ = deep_mod.load_network(settings.checkpoint)
        return NetworkSource(params, model_params)
    raise ConfigError(f"cannot serve from a {kind} checkpoint")


class Session:
    """One connection's game: environment, estimator, balancer, score."""

    def __init__(self, source, settings: ServerSettings, seed: int = 0):
        self.source = source
        self.settings = settings
        self.balance_cfg = BalanceConfig(delta=settings.delta)
        self.estimator = EstimatorState(
            beta_op_hat=settings.initial_beta_op_hat, alpha2=settings.alpha2
        )
        self.rng = np.random.default_rng(seed)
        from .envs import PongEnv

        self.env = PongEnv(seed=seed, cfg=settings.pong)
        self.beta_pl = balance(self.estimator.beta_op_hat, self.balance_cfg)
        self.tick = 0
        self.score = [0, 0]
        self.held_action = (0, 0)
        self._ep_rows: list[np.ndarray] = []
        self._ep_actions: list[int] = []
        self._needs_reset = False

    def set_delta(self, delta: float) -> None:
        self.balance_cfg = BalanceConfig(delta=float(delta))
        self.beta_pl = balance(self.estimator.beta_op_hat, self.balance_cfg)

    def reset(self) -> None:
        self.env.reset(seed=int(self.rng.integers(0, 2**63 - 1)))
        self._ep_rows.clear()
        self._ep_actions.clear()
        self._needs_reset = False

    def step(self, human_action: tuple[int, int] | None = None) -> dict:
        """Advance one tick with the held (or given) opponent action."""
        if self._needs_reset:
            self.reset()
        if human_action is not None:
            self.held_action = human_action
        h, v = self.held_action
        # Wire vertical is screen-down-positive (-1 = up); the court's
        # vertical axis points up.
        a_op = action_index(h, -v)

        mat = self.source.matrix(self.env.state)
        params = self.source.model_params
        marg_pl = soft.lse_beta_axis(mat, params.rho_op, self.estimator.beta_op_hat, axis=1)
        pi_pl = soft.softmax_weighted_axis(marg_pl, params.rho_pl, self.beta_pl)
        a_pl = soft.sample_action(pi_pl, self.rng)

        marg_op = soft.lse_beta_axis(mat, params.rho_pl, params.beta_pl, axis=0)
        self._ep_rows.append(marg_op)
        self._ep_actions.append(a_op)

        out = self.env.step(a_pl, a_op)
        self.tick += 1
        if out.terminal:
            if out.info == "scored_pl":
                self.score[0] += 1
            elif out.info == "scored_op":
                self.score[1] += 1
            self._end_episode()
            self._needs_reset = True
        return self._frame(out.next_state, out.terminal)

    def _end_episode(self) -> None:
        if self._ep_actions:
            rows = np.asarray(self._ep_rows)
            actions = np.asarray(self._ep_actions, dtype=np.int64)
            sgd_step_from_rows(self.estimator, rows, actions,
                               self.source.model_params.rho_op)
        self.beta_pl = balance(self.estimator.beta_op_hat, self.balance_cfg)

    def _frame(self, state, terminal: bool) -> dict:
        return {
            "v": PROTOCOL_VERSION,
            "type": "state",
            "tick": self.tick,
            "state": [float(x) for x in state.as_vector()],
            "beta_op_hat": float(self.estimator.beta_op_hat),
            "beta_pl": float(self.beta_pl),
            "score": list(self.score),
            "terminal": bool(terminal),
        }

    def initial_frame(self) -> dict:
        return self._frame(self.env.state, False)


class ProtocolError(ValueError):
    pass


def parse_client_message(raw: str) -> dict:
    """Validate a client frame; raises ProtocolError without side effects."""
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not JSON: {exc}") from exc
    if not isinstance(msg, dict) or "type" not in msg:
        raise ProtocolError("message must be an object with a 'type'")
    kind = msg["type"]
    if kind == "action":
        h, v = msg.get("h"), msg.get("v")
        if h not in (-1, 0, 1) or v not in (-1, 0, 1):
            raise ProtocolError("action components must be -1, 0 or 1")
        return {"type": "action", "h": int(h), "v": int(v)}
    if kind == "config":
        if msg.get("v", PROTOCOL_VERSION) != PROTOCOL_VERSION:
            raise ProtocolError("unsupported protocol version")
        delta = msg.get("delta")
        if not isinstance(delta, (int, float)) or math.isnan(float(delta)) or delta < 0:
            raise ProtocolError("config.delta must be a non-negative number")
        return {"type": "config", "delta": float(delta)}
    if kind == "reset":
        if msg.get("v", PROTOCOL_VERSION) != PROTOCOL_VERSION:
            raise ProtocolError("unsupported protocol version")
        return {"type": "reset"}
    raise ProtocolError(f"unknown message type {kind!r}")


def build_app(settings: ServerSettings) -> FastAPI:
    source = load_policy_source(settings)
    app = FastAPI(title="softgames play server")
    app.state.settings = settings
    app.state.sessions = 0

    ui_dir = settings.ui_dir
    if ui_dir is None:
        here = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
        candidate = os.path.join(here, "frontend", "dist")
        ui_dir = candidate if os.path.isdir(candidate) else None
    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/static", StaticFiles(directory=ui_dir), name="static")

    @app.get("/healthz")
    async def healthz():
        return JSONResponse({"status": "ok", "sessions": app.state.sessions})

    @app.get("/")
    async def index():
        if ui_dir:
            index_path = os.path.join(ui_dir, "index.html")
            if os.path.exists(index_path):
                with open(index_path, encoding="utf-8") as fh:
                    return HTMLResponse(fh.read())
        return HTMLResponse(_FALLBACK_PAGE)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        app.state.sessions += 1
        session = Session(source, settings, seed=app.state.sessions)
        interval = 1.0 / settings.tick_rate if settings.tick_rate > 0 else None
        try:
            await ws.send_text(json.dumps(session.initial_frame()))
            while True:
                action = None
                if interval is None:
                    raw = await ws.receive_text()  # lockstep
                else:
                    try:
                        raw = await asyncio.wait_for(ws.receive_text(), timeout=interval)
                    except asyncio.TimeoutError:
                        raw = None
                if raw is not None:
                    try:
                        msg = parse_client_message(raw)
                    except ProtocolError as exc:
                        await ws.close(code=PROTOCOL_ERROR_CLOSE, reason=str(exc))
                        return
                    if msg["type"] == "action":
                        action = (msg["h"], msg["v"])
                    elif msg["type"] == "config":
                        session.set_delta(msg["delta"])
                    elif msg["type"] == "reset":
                        session.reset()
                frame = session.step(action)
                await ws.send_text(json.dumps(frame))
        except WebSocketDisconnect:
            pass
        finally:
            app.state.sessions -= 1

    return app
