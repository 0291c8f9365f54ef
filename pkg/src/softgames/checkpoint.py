"""Versioned JSON checkpoints for joint Q tables and game models.

Doubles are written as 17-significant-digit decimals, which round-trips
IEEE-754 exactly through any conforming JSON parser.
"""

from __future__ import annotations

import json
import os
from typing import Iterable

import numpy as np

from .errors import ConfigError
from .types import GameModel, JointQ

CHECKPOINT_VERSION = 1


def _fmt(x: float) -> str:
    if not np.isfinite(x):
        raise ConfigError("cannot serialise non-finite values")
    return format(float(x), ".17g")


def _fmt_array(values: Iterable[float]) -> str:
    return "[" + ",".join(_fmt(v) for v in values) + "]"


def save_joint_q(q: JointQ, gamma: float, path: str) -> None:
    """Write the {"version","shape","gamma","q"} checkpoint document."""
    s, apl, aop = q.shape
    doc = (
        f'{{"version":{CHECKPOINT_VERSION},'
        f'"shape":[{s},{apl},{aop}],'
        f'"gamma":{_fmt(gamma)},'
        f'"q":{_fmt_array(q.values.ravel())}}}'
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(doc)


def load_joint_q(path: str) -> tuple[JointQ, float]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version in {path}")
    if "q" not in doc or "shape" not in doc:
        raise ConfigError(f"{path} is not a joint-Q checkpoint")
    shape = tuple(doc["shape"])
    flat = np.asarray(doc["q"], dtype=np.float64)
    if flat.size != int(np.prod(shape)):
        raise ConfigError("checkpoint q length does not match its shape")
    return JointQ(flat.reshape(shape)), float(doc["gamma"])


def save_game_model(model: GameModel, path: str) -> None:
    doc = (
        f'{{"version":{CHECKPOINT_VERSION},'
        f'"kind":"game_model",'
        f'"shape":[{model.n_states},{model.n_actions_pl},{model.n_actions_op}],'
        f'"support":{model.support},'
        f'"gamma":{_fmt(model.gamma)},'
        f'"rewards":{_fmt_array(model.rewards.ravel())},'
        f'"next_states":[{",".join(str(int(i)) for i in model.next_states.ravel())}],'
        f'"next_probs":{_fmt_array(model.next_probs.ravel())}}}'
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(doc)


def load_game_model(path: str) -> GameModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION or doc.get("kind") != "game_model":
        raise ConfigError(f"{path} is not a game-model checkpoint")
    s, apl, aop = doc["shape"]
    k = doc["support"]
    return GameModel(
        n_states=s,
        n_actions_pl=apl,
        n_actions_op=aop,
        rewards=np.asarray(doc["rewards"]).reshape(s, apl, aop),
        next_states=np.asarray(doc["next_states"], dtype=np.int64).reshape(s, apl, aop, k),
        next_probs=np.asarray(doc["next_probs"]).reshape(s, apl, aop, k),
        gamma=float(doc["gamma"]),
    )


def checkpoint_kind(path: str) -> str:
    """'joint_q', 'game_model' or 'network' by inspecting the document."""
    if not os.path.exists(path):
        raise ConfigError(f"checkpoint not found: {path}")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") == "game_model":
        return "game_model"
    if doc.get("kind") == "network" or "layers" in doc:
        return "network"
    if "q" in doc:
        return "joint_q"
    raise ConfigError(f"unrecognised checkpoint document: {path}")
