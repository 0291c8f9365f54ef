"""Backend equivalence: the compiled extension and the pure fallback must
produce the same numbers, including full training trajectories."""

import math

import numpy as np
import pytest

from softgames import kernels
from softgames.envs import GridWorld, random_game
from softgames.kernels import pure

compiled = pytest.importorskip("softgames.kernels._core")


@pytest.mark.parametrize("beta", [-25.0, -1.0, -1e-9, 0.0, 1e-9, 0.5, 30.0, math.inf, -math.inf])
def test_lse_bitwise_equal(beta):
    rng = np.random.default_rng(0)
    for _ in range(50):
        vals = rng.uniform(-20, 20, size=6)
        w = rng.dirichlet(np.ones(6))
        w = w / w.sum()
        if abs(w.sum() - 1.0) > 1e-12:
            continue
        assert compiled.lse_beta(vals, w, beta) == pure.lse_beta(vals, w, beta)


@pytest.mark.parametrize("beta", [-10.0, 0.0, 3.0, math.inf, -math.inf])
def test_softmax_bitwise_equal(beta):
    rng = np.random.default_rng(1)
    for _ in range(50):
        vals = rng.uniform(-5, 5, size=5)
        w = np.full(5, 0.2)
        np.testing.assert_array_equal(
            compiled.softmax_weighted(vals, w, beta),
            pure.softmax_weighted(vals, w, beta),
        )


def test_validation_parity():
    for fn in (compiled.lse_beta, pure.lse_beta):
        with pytest.raises(ValueError):
            fn([1.0, 2.0], [0.5, 0.6], 1.0)
        with pytest.raises(ValueError):
            fn([np.nan, 2.0], [0.5, 0.5], 1.0)


def _loop_args(estimate):
    gw = GridWorld()
    model = gw.as_game_model()
    return model, gw.terminal_mask(), gw.start_index, dict(
        gamma=0.9, alpha=0.5, beta_pl=10.0, beta_op_model=-4.0, beta_op_actor=3.0,
        rho_pl=np.full(5, 0.2), rho_op=np.full(5, 0.2),
        n_episodes=15, episode_cap=200, seed=777,
        learn=True, estimate=estimate, alpha2=0.1, window=256,
        collect_transcript=True,
    )


@pytest.mark.parametrize("estimate", [False, True])
def test_training_trajectories_bitwise_equal(estimate):
    model, term, start, args = _loop_args(estimate)
    q1 = np.zeros((model.n_states, 5, 5))
    q2 = np.zeros((model.n_states, 5, 5))
    r1 = compiled.run_tabular_loop(q1, model.next_states, model.next_probs,
                                   model.rewards, term, start, **args)
    r2 = pure.run_tabular_loop(q2, model.next_states, model.next_probs,
                               model.rewards, term, start, **args)
    np.testing.assert_array_equal(q1, q2)
    np.testing.assert_array_equal(r1["episode_rewards"], r2["episode_rewards"])
    np.testing.assert_array_equal(r1["episode_lengths"], r2["episode_lengths"])
    np.testing.assert_array_equal(r1["transcript_states"], r2["transcript_states"])
    np.testing.assert_array_equal(r1["transcript_aop"], r2["transcript_aop"])
    assert r1["beta_hat_final"] == r2["beta_hat_final"]
    assert r1["n_steps"] == r2["n_steps"]


def test_stochastic_transitions_equal():
    model = random_game(3, n_states=4, gamma=0.8)
    term = np.zeros(4, dtype=np.uint8)
    args = dict(
        gamma=0.8, alpha=0.3, beta_pl=2.0, beta_op_model=-2.0, beta_op_actor=-2.0,
        rho_pl=np.full(2, 0.5), rho_op=np.full(2, 0.5),
        n_episodes=10, episode_cap=40, seed=123,
        learn=True, estimate=False,
    )
    q1 = np.zeros((4, 2, 2))
    q2 = np.zeros((4, 2, 2))
    r1 = compiled.run_tabular_loop(q1, model.next_states, model.next_probs,
                                   model.rewards, term, 0, **args)
    r2 = pure.run_tabular_loop(q2, model.next_states, model.next_probs,
                               model.rewards, term, 0, **args)
    np.testing.assert_array_equal(q1, q2)
    np.testing.assert_array_equal(r1["episode_rewards"], r2["episode_rewards"])


def test_backend_selection_reports():
    assert kernels.BACKEND in ("compiled", "pure")
    assert kernels.HAVE_COMPILED == (kernels.BACKEND == "compiled")
