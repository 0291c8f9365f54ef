"""Grid-world and Pong environment behaviour."""

import math

import numpy as np
import pytest

from softgames.envs import (
    CoarsePong,
    GridWorld,
    GridWorldState,
    PongEnv,
    PongState,
    action_components,
    action_index,
    discretize_pong,
    gridworld_step,
    pong_bin_centre,
    pong_step,
    state_index,
)
from softgames.envs import pong as pong_mod
from softgames.soft import solve_value_iteration
from softgames.types import RationalityParams


class TestGridWorld:
    def test_move_right_costs_movement(self):
        s = GridWorldState((2, 5), (5, 6))
        out = gridworld_step(s, 1, 4)  # player right, opponent no-op pickup
        assert out.next_state.pos_pl == (2, 6)
        assert out.reward_pl == -0.02
        assert not out.terminal

    def test_pickup_at_object_cell(self):
        s = GridWorldState((2, 6), (5, 1))
        out = gridworld_step(s, 4, 0)
        assert out.reward_pl == 1.0
        assert out.terminal
        assert out.info == "picked_up"
        assert not out.next_state.object_present

    def test_both_move_into_same_cell_blocked(self):
        s = GridWorldState((3, 2), (3, 4))  # both adjacent to (3,3)
        out = gridworld_step(s, 1, 0)  # player right, opponent left
        assert out.next_state.pos_pl == (3, 2)
        assert out.next_state.pos_op == (3, 4)
        assert out.info == "blocked"

    def test_premove_cell_blocks(self):
        s = GridWorldState((3, 2), (3, 3))
        out = gridworld_step(s, 1, 1)  # player into opponent's old cell
        assert out.next_state.pos_pl == (3, 2)  # blocked
        assert out.next_state.pos_op == (3, 4)

    def test_swap_is_blocked_both_ways(self):
        s = GridWorldState((3, 2), (3, 3))
        out = gridworld_step(s, 1, 0)
        assert out.next_state.pos_pl == (3, 2)
        assert out.next_state.pos_op == (3, 3)

    def test_off_grid_stays_with_cost(self):
        s = GridWorldState((1, 1), (5, 6))
        out = gridworld_step(s, 2, 4)  # up from the top row
        assert out.next_state.pos_pl == (1, 1)
        assert out.reward_pl == -0.02

    def test_pickup_elsewhere_is_noop_with_cost(self):
        s = GridWorldState((3, 3), (5, 6))
        out = gridworld_step(s, 4, 4)
        assert out.next_state.pos_pl == (3, 3)
        assert out.reward_pl == -0.02
        assert not out.terminal

    def test_determinism(self):
        s = GridWorldState((4, 4), (2, 2))
        outs = [gridworld_step(s, 3, 2) for _ in range(5)]
        assert all(o == outs[0] for o in outs)

    def test_never_cooccupy(self):
        rng = np.random.default_rng(0)
        env = GridWorld()
        env.reset()
        for _ in range(2000):
            out = env.step(int(rng.integers(5)), int(rng.integers(5)))
            assert out.next_state.pos_pl != out.next_state.pos_op
            if out.terminal:
                env.reset()

    def test_reset_start_cells(self):
        env = GridWorld()
        s = env.reset(seed=123)
        assert s.pos_pl == (5, 1)
        assert s.pos_op == (3, 3)
        assert s.object_present

    def test_timeout_at_cap(self):
        env = GridWorld()
        env.reset()
        last = None
        for _ in range(200):
            last = env.step(4, 4)  # both idle via failed pickup
        assert last.terminal and last.info == "timeout"

    def test_state_index_bijective_on_valid_pairs(self):
        seen = set()
        for r1 in range(1, 6):
            for c1 in range(1, 7):
                for r2 in range(1, 6):
                    for c2 in range(1, 7):
                        idx = state_index(GridWorldState((r1, c1), (r2, c2)))
                        assert idx not in seen
                        seen.add(idx)
        assert max(seen) < GridWorld.n_tabular_states - 1

    def test_perfect_blocker_pins_value_to_movement_cost(self):
        # With a perfectly rational adversary the pickup is unreachable from
        # the start, so the sup-discounted value is the pure movement cost.
        env = GridWorld()
        model = env.as_game_model()
        p = RationalityParams.uniform(5, 5, math.inf, -math.inf)
        res = solve_value_iteration(model, p, tol=1e-10)
        movement_only = -0.02 / (1 - model.gamma)
        assert res.value.values[env.start_index] <= movement_only + 1e-6


class TestPongActions:
    def test_round_trip(self):
        for a in range(9):
            h, v = action_components(a)
            assert action_index(h, v) == a

    def test_rejects_bad_components(self):
        with pytest.raises(ValueError):
            action_index(2, 0)
        with pytest.raises(ValueError):
            action_components(9)


class TestPong:
    def test_free_flight(self):
        s = PongState(-0.775, 0, 0, 0, 0.775, 0, 0, 0, 0.0, 0.0, 0.02, 0.0, 0.0)
        out = pong_step(s, action_index(0, 0), action_index(0, 0))
        assert out.next_state.ball_x == pytest.approx(0.02)
        assert out.next_state.ball_y == 0.0
        assert out.reward_pl == 0.0
        assert not out.terminal

    def test_player_scores(self):
        s = PongState(-0.775, 0, 0, 0, 0.775, 0.9, 0, 0, 0.99, 0.0, 0.03, 0.0, 0.0)
        out = pong_step(s, 4, 4)
        assert out.terminal and out.info == "scored_pl" and out.reward_pl == 1.0

    def test_opponent_scores(self):
        s = PongState(-0.775, 0.9, 0, 0, 0.775, 0, 0, 0, -0.99, 0.0, -0.03, 0.0, 0.0)
        out = pong_step(s, 4, 4)
        assert out.terminal and out.info == "scored_op" and out.reward_pl == -1.0

    def test_paddle_reflects(self):
        s = PongState(-0.775, 0.0, 0, 0, 0.775, 0.9, 0, 0, -0.76, 0.0, -0.03, 0.0, 0.0)
        out = pong_step(s, 4, 4)
        ns = out.next_state
        assert ns.ball_vx == 0.03  # reflected off the player paddle
        assert not out.terminal

    def test_energy_conserved_across_bounces(self):
        env = PongEnv(seed=3)
        speed0 = math.hypot(env.state.ball_vx, env.state.ball_vy)
        rng = np.random.default_rng(0)
        for _ in range(3000):
            out = env.step(int(rng.integers(9)), int(rng.integers(9)))
            s = out.next_state
            assert math.hypot(s.ball_vx, s.ball_vy) == pytest.approx(speed0, abs=1e-9)
            if out.terminal:
                env.reset(seed=3)

    def test_zero_sum_bookkeeping(self):
        env = PongEnv(seed=11)
        for ep in range(30):
            env.reset(seed=ep)
            nonzero = []
            rng = np.random.default_rng(ep)
            while True:
                out = env.step(int(rng.integers(9)), int(rng.integers(9)))
                assert out.reward_pl in (-1.0, 0.0, 1.0)
                if out.reward_pl != 0.0:
                    nonzero.append(out.reward_pl)
                if out.terminal:
                    break
            if out.info == "timeout":
                assert nonzero == []
            else:
                assert len(nonzero) == 1

    def test_reset_seed_reproducible(self):
        a = PongEnv().reset(seed=5)
        b = PongEnv().reset(seed=5)
        assert a == b

    def test_reset_seeds_differ(self):
        a = PongEnv().reset(seed=1)
        b = PongEnv().reset(seed=2)
        assert (a.ball_vx, a.ball_vy) != (b.ball_vx, b.ball_vy)

    def test_wall_bounce_flips_vy(self):
        s = PongState(-0.775, 0, 0, 0, 0.775, 0, 0, 0, 0.0, 0.999, 0.01, 0.02, 0.0)
        out = pong_step(s, 4, 4)
        assert out.next_state.ball_vy == -0.02
        assert out.next_state.ball_y <= 1.0


class TestDiscretizer:
    def test_bin_centre_round_trip(self):
        rng = np.random.default_rng(0)
        for bins in (2, 3):
            for _ in range(50):
                idx = int(rng.integers(0, bins**13))
                centre = pong_bin_centre(idx, bins)
                assert discretize_pong(centre, bins) == idx

    def test_same_bin_same_index(self):
        s1 = initial = pong_mod.initial_state(seed=0)
        s2 = PongState.from_vector(initial.as_vector() + 1e-6)
        assert discretize_pong(s1, 2) == discretize_pong(s2, 2)

    def test_adjacent_bins_differ(self):
        base = pong_mod.initial_state(seed=0).as_vector()
        s1 = PongState.from_vector(base)
        moved = base.copy()
        moved[9] = 0.9 if base[9] < 0 else -0.9  # push ball y across a bin edge
        s2 = PongState.from_vector(moved)
        assert discretize_pong(s1, 2) != discretize_pong(s2, 2)

    def test_out_of_range_rejected(self):
        bad = pong_mod.initial_state(seed=0).as_vector()
        bad[0] = 2.0
        with pytest.raises(ValueError):
            discretize_pong(PongState.from_vector(bad), 2)
        with pytest.raises(ValueError):
            discretize_pong(pong_mod.initial_state(seed=0), 1)

    def test_coarse_pong_identity_ids_at_two_bins(self):
        # Two independent instances agree on ids with no shared mapping.
        a = CoarsePong(bins_per_dim=2, seed=0)
        b = CoarsePong(bins_per_dim=2, seed=1)
        assert a.identity
        s = a.reset(seed=0)
        assert a.encode(s) == b.encode(s)
        assert a.n_tabular_states == 2**13 + 1

    def test_coarse_pong_compacts_ids_at_three_bins(self):
        env = CoarsePong(bins_per_dim=3, seed=0)
        assert not env.identity
        s = env.reset(seed=0)
        assert env.encode(s) == 0
        out = env.step(0, 0)
        assert env.encode(out.next_state) in (0, 1)
        mapping = env.mapping()
        env2 = CoarsePong(bins_per_dim=3)
        env2.load_mapping(mapping)
        assert env2.encode(s) == 0
