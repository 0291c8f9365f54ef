from .gridworld import GridWorld, GridWorldState, gridworld_step, state_index
from .pong import (
    CoarsePong,
    PongConfig,
    PongEnv,
    PongState,
    action_components,
    action_index,
    discretize_pong,
    pong_bin_centre,
    pong_step,
)
from .random_games import GameModelEnv, random_game

__all__ = [
    "GridWorld",
    "GridWorldState",
    "gridworld_step",
    "state_index",
    "CoarsePong",
    "PongConfig",
    "PongEnv",
    "PongState",
    "action_components",
    "action_index",
    "discretize_pong",
    "pong_bin_centre",
    "pong_step",
    "GameModelEnv",
    "random_game",
]
