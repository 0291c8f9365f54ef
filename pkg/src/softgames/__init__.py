"""softgames: two-player soft Q-learning with tuneable rationality.

Closed-form solving, tabular learning, online opponent-rationality
estimation, automatic game balancing, a desk-scale deep variant, and a
live play service.
"""

from .kernels import BACKEND, HAVE_COMPILED
from .soft import (
    bellman_backup,
    lse_beta,
    marginal_q_player,
    marginal_q_opponent,
    opponent_policy,
    player_policy,
    sample_action,
    soft_value_from_marginal,
    solve_value_iteration,
    td_update,
)
from .types import (
    EstimatorState,
    GameModel,
    JointQ,
    MetricsRow,
    PolicyTable,
    RationalityParams,
    SoftValue,
    StepOutcome,
    TransitionRecord,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HAVE_COMPILED",
    "EstimatorState",
    "GameModel",
    "JointQ",
    "MetricsRow",
    "PolicyTable",
    "RationalityParams",
    "SoftValue",
    "StepOutcome",
    "TransitionRecord",
    "bellman_backup",
    "lse_beta",
    "marginal_q_player",
    "marginal_q_opponent",
    "opponent_policy",
    "player_policy",
    "sample_action",
    "soft_value_from_marginal",
    "solve_value_iteration",
    "td_update",
    "__version__",
]
