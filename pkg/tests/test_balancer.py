"""Balance formula and balanced-play mechanics."""

import math

import numpy as np
import pytest

from softgames.balancer import BalanceConfig, BalanceRow, balance, balanced_play
from softgames.envs import GameModelEnv, random_game
from softgames.errors import ConfigError
from softgames.types import EstimatorState, JointQ, RationalityParams


class TestBalanceFormula:
    def test_equal_strength(self):
        assert balance(-20.0, BalanceConfig(delta=0.0)) == 20.0

    def test_strong_player_reference(self):
        assert balance(-20.0, BalanceConfig(delta=30.0)) == 50.0

    def test_zero_estimate(self):
        assert balance(0.0, BalanceConfig(delta=5.0)) == 5.0

    def test_clamped_to_bounds(self):
        cfg = BalanceConfig(delta=0.0, beta_pl_bounds=(0.1, 100.0))
        assert balance(0.0, cfg) == 0.1
        assert balance(-500.0, cfg) == 100.0

    def test_monotone_in_delta_and_estimate(self):
        cfg0 = BalanceConfig(delta=0.0)
        prev = -1.0
        for delta in (0.0, 5.0, 15.0, 30.0):
            val = balance(-10.0, BalanceConfig(delta=delta))
            assert val >= prev
            prev = val
        prev = -1.0
        for est in (0.0, -5.0, 12.0, -40.0):
            val = balance(est, cfg0)
            assert abs(est) + 0.0 == pytest.approx(max(val, abs(est)), abs=0.2)
        assert balance(-8.0, cfg0) <= balance(-16.0, cfg0)

    def test_exact_inside_bounds(self):
        cfg = BalanceConfig(delta=7.5)
        assert balance(-12.25, cfg) == 12.25 + 7.5

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            balance(math.inf, BalanceConfig())

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            BalanceConfig(beta_pl_bounds=(5.0, 1.0))
        with pytest.raises(ConfigError):
            BalanceConfig(update_every=0)


class FrozenTabularEnv(GameModelEnv):
    """Model env with the tabular-env attributes balanced_play expects."""


def make_setup(seed=0):
    model = random_game(seed, n_states=4, n_actions_pl=3, n_actions_op=3, gamma=0.8)
    env = FrozenTabularEnv(model, episode_cap=25, seed=seed)
    env.absorbing_state = model.n_states  # unused: no terminals
    from softgames.soft import solve_value_iteration

    opp = RationalityParams.uniform(3, 3, 10.0, -6.0)
    q = solve_value_iteration(model, opp, tol=1e-8).q
    return env, q, opp


class TestBalancedPlay:
    def test_rows_schema_and_running_average(self):
        env, q, opp = make_setup()
        est = EstimatorState(beta_op_hat=0.0, alpha2=0.1)
        rows = balanced_play(env, q, est, BalanceConfig(delta=2.0, update_every=3),
                             episodes=9, opponent_params=opp, seed=1)
        assert len(rows) == 9
        running = np.cumsum([r.episode_reward for r in rows]) / np.arange(1, 10)
        np.testing.assert_allclose([r.avg_reward for r in rows], running, atol=1e-12)
        assert all(r.delta == 2.0 for r in rows)

    def test_beta_pl_updates_on_cadence(self):
        env, q, opp = make_setup(1)
        est = EstimatorState(beta_op_hat=0.0, alpha2=0.5)
        rows = balanced_play(env, q, est, BalanceConfig(delta=1.0, update_every=4),
                             episodes=8, opponent_params=opp, seed=2)
        # beta_pl is frozen between refreshes
        assert rows[0].beta_pl == rows[1].beta_pl == rows[2].beta_pl == rows[3].beta_pl
        assert rows[3].beta_pl != rows[4].beta_pl or est.round == 8

    def test_never_update_keeps_initial(self):
        env, q, opp = make_setup(2)
        est = EstimatorState(beta_op_hat=0.0, alpha2=0.5)
        rows = balanced_play(env, q, est, BalanceConfig(delta=0.0, update_every=math.inf),
                             episodes=6, opponent_params=opp, seed=3,
                             initial_beta_pl=50.0)
        assert all(r.beta_pl == 50.0 for r in rows)
        assert est.round == 6  # estimation still runs

    def test_estimator_converges_toward_opponent(self):
        env, q, opp = make_setup(3)
        est = EstimatorState(beta_op_hat=0.0, alpha2=0.5)
        balanced_play(env, q, est, BalanceConfig(delta=0.0, update_every=5),
                      episodes=120, opponent_params=opp, seed=4)
        assert abs(est.beta_op_hat - opp.beta_op) < 2.0

    def test_q_frozen_during_play(self):
        env, q, opp = make_setup(4)
        before = q.values.copy()
        est = EstimatorState(beta_op_hat=0.0, alpha2=0.1)
        balanced_play(env, q, est, BalanceConfig(delta=3.0), episodes=5,
                      opponent_params=opp, seed=5)
        np.testing.assert_array_equal(q.values, before)

    def test_csv_row_format(self):
        row = BalanceRow(3, -9.5, 12.0, 2.5, 0.125, 0.5)
        assert row.as_csv_row() == ["3", "-9.5", "12.0", "2.5", "0.125"]
