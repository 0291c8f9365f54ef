"""Training loops: Algorithm-1 learning, Algorithm-2 estimation, evaluation."""

import numpy as np
import pytest

from softgames.envs import GameModelEnv, GridWorld, random_game
from softgames.errors import ConfigError
from softgames.learner import TrainConfig, evaluate, train_tabular, train_tabular_with_estimation
from softgames.soft import solve_value_iteration
from softgames.types import GameModel, RationalityParams


def one_state_bandit(gamma=0.0):
    rewards = np.array([[[1.0, -0.5], [0.25, 2.0]]])
    return GameModel(
        n_states=1, n_actions_pl=2, n_actions_op=2,
        rewards=rewards,
        next_states=np.zeros((1, 2, 2, 1), dtype=np.int64),
        next_probs=np.ones((1, 2, 2, 1)),
        gamma=gamma,
    )


class TestTrainTabular:
    def test_bandit_alpha_one_recovers_reward_matrix(self):
        model = one_state_bandit()
        env = GameModelEnv(model, episode_cap=40, seed=0)
        cfg = TrainConfig(
            episodes=20, params=RationalityParams.uniform(2, 2, 1e-12, 1e-12),
            alpha=1.0, eval_every=20, eval_episodes=2, seed=3,
        )
        q, _ = train_tabular(env, cfg)
        np.testing.assert_allclose(q.values, model.rewards, atol=1e-12)

    def test_learned_q_approaches_exact_solution(self):
        # Constant alpha leaves an O(alpha * reward-spread) noise floor on a
        # stochastic kernel, so the check needs a small step size.
        model = random_game(5, n_states=3, gamma=0.8)
        env = GameModelEnv(model, episode_cap=60, seed=0)
        params = RationalityParams.uniform(2, 2, 3.0, -2.0)
        cfg = TrainConfig(episodes=3000, params=params, alpha=0.05,
                          eval_every=1000, eval_episodes=5, seed=1,
                          stop_on_plateau=False)
        q, metrics = train_tabular(env, cfg)
        exact = solve_value_iteration(model, params, tol=1e-10)
        assert np.max(np.abs(q.values - exact.q.values)) < 0.1

    def test_gridworld_collaborative_beats_adversarial(self):
        rewards = {}
        for beta_op in (20.0, -20.0):
            env = GridWorld()
            params = RationalityParams.uniform(5, 5, 20.0, beta_op)
            cfg = TrainConfig(episodes=1500, params=params, alpha=0.5,
                              eval_every=500, eval_episodes=40, seed=7,
                              stop_on_plateau=False)
            _, metrics = train_tabular(env, cfg)
            rewards[beta_op] = metrics[-1].mean_reward
        assert rewards[20.0] > rewards[-20.0] + 0.5

    def test_bellman_error_trends_down_at_high_alpha(self):
        env = GridWorld()
        params = RationalityParams.uniform(5, 5, 20.0, 5.0)
        cfg = TrainConfig(episodes=1200, params=params, alpha=0.5,
                          eval_every=200, eval_episodes=20, seed=2,
                          stop_on_plateau=False)
        _, metrics = train_tabular(env, cfg)
        errs = [m.bellman_error for m in metrics]
        assert np.mean(errs[-2:]) < np.mean(errs[:2])

    def test_determinism_given_seed(self):
        model = random_game(9, n_states=3, gamma=0.7)
        params = RationalityParams.uniform(2, 2, 2.0, 2.0)
        runs = []
        for _ in range(2):
            env = GameModelEnv(model, episode_cap=30, seed=0)
            cfg = TrainConfig(episodes=50, params=params, alpha=0.3,
                              eval_every=25, eval_episodes=5, seed=11)
            q, metrics = train_tabular(env, cfg)
            runs.append((q.values.copy(), [m.mean_reward for m in metrics]))
        np.testing.assert_array_equal(runs[0][0], runs[1][0])
        assert runs[0][1] == runs[1][1]

    def test_config_validation(self):
        params = RationalityParams.uniform(2, 2, 1.0, 1.0)
        with pytest.raises(ConfigError):
            TrainConfig(episodes=10, params=params, alpha=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(episodes=0, params=params)


class TestEstimationTraining:
    def test_recovers_positive_hidden_beta(self):
        env = GridWorld()
        params = RationalityParams.uniform(5, 5, 10.0, 5.0)  # true beta_op = 5
        cfg = TrainConfig(episodes=1200, params=params, alpha=0.5,
                          eval_every=400, eval_episodes=5, seed=0,
                          stop_on_plateau=False)
        _, est, _ = train_tabular_with_estimation(env, cfg, initial_beta_op_hat=-8.0,
                                                  target_beta=5.0, stop_on_hit=True)
        assert est.first_hit_step is not None

    def test_recovers_negative_hidden_beta(self):
        env = GridWorld()
        params = RationalityParams.uniform(5, 5, 10.0, -10.0)
        cfg = TrainConfig(episodes=1200, params=params, alpha=0.5,
                          eval_every=400, eval_episodes=5, seed=1,
                          stop_on_plateau=False)
        _, est, _ = train_tabular_with_estimation(env, cfg, initial_beta_op_hat=8.0,
                                                  target_beta=-10.0, stop_on_hit=True)
        assert est.first_hit_step is not None

    def test_uniform_opponent_keeps_estimate_near_zero(self):
        # With reference-policy data the gradient vanishes at beta = 0; the
        # constant-step estimate random-walks in a band around it, so the
        # check is on the time average.
        env = GridWorld()
        params = RationalityParams.uniform(5, 5, 10.0, 1e-12)  # opponent plays rho_op
        cfg = TrainConfig(episodes=800, params=params, alpha=0.5,
                          eval_every=200, eval_episodes=5, seed=2,
                          stop_on_plateau=False)
        _, est, _ = train_tabular_with_estimation(env, cfg, initial_beta_op_hat=3.0)
        trace = np.array(est.beta_trace)
        assert abs(trace[len(trace) // 2:].mean()) < 2.0

    def test_requires_model_env(self):
        class Opaque:
            pass

        params = RationalityParams.uniform(2, 2, 1.0, 1.0)
        cfg = TrainConfig(episodes=1, params=params)
        with pytest.raises(ConfigError):
            train_tabular_with_estimation(Opaque(), cfg, 0.0)

    def test_metrics_carry_estimate(self):
        env = GridWorld()
        params = RationalityParams.uniform(5, 5, 10.0, 5.0)
        cfg = TrainConfig(episodes=100, params=params, alpha=0.5,
                          eval_every=50, eval_episodes=5, seed=3)
        _, est, metrics = train_tabular_with_estimation(env, cfg, 0.0)
        assert all(m.beta_op_hat is not None for m in metrics)
        assert est.round == 100  # one bookkeeping round per episode


class TestEvaluate:
    def test_fixed_point_has_tiny_bellman_error(self):
        # Deterministic kernel: the sampled residual at the fixed point is
        # the fixed-point identity itself.
        model = random_game(12, n_states=3, gamma=0.8, deterministic=True)
        env = GameModelEnv(model, episode_cap=50, seed=0)
        params = RationalityParams.uniform(2, 2, 4.0, -1.0)
        tol = 1e-9
        res = solve_value_iteration(model, params, tol=tol)
        _, bellman = evaluate(env, res.q, params, n_episodes=20, seed=5)
        assert bellman < tol * 3

    def test_zero_table_on_rewarding_env_has_error(self):
        model = one_state_bandit()
        env = GameModelEnv(model, episode_cap=20, seed=0)
        params = RationalityParams.uniform(2, 2, 1.0, 1.0)
        from softgames.types import JointQ

        _, bellman = evaluate(env, JointQ.zeros(1, 2, 2), params, n_episodes=5, seed=0)
        assert bellman > 0

    def test_same_seed_identical(self):
        env = GridWorld()
        params = RationalityParams.uniform(5, 5, 5.0, -5.0)
        from softgames.types import JointQ

        q = JointQ(np.random.default_rng(0).normal(size=(env.n_tabular_states, 5, 5)) * 0.1)
        a = evaluate(env, q, params, n_episodes=10, seed=9)
        b = evaluate(env, q, params, n_episodes=10, seed=9)
        assert a == b
