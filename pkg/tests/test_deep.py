"""Deep module: forward pass, soft values, backprop, replay, target, Adam."""

import math

import numpy as np
import pytest

import oracles
from softgames import soft
from softgames.deep import (
    AdamState,
    DeepConfig,
    QNetworkParams,
    ReplayMemory,
    TargetParams,
    forward,
    load_network,
    loss_batch,
    save_network,
    soft_value_net,
    sync_target,
    train_deep,
)
from softgames.envs import PongEnv
from softgames.types import RationalityParams


def tiny_net(seed=0, sizes=(3, 4), n_pl=2, n_op=2):
    return QNetworkParams.init(seed, hidden=sizes, n_actions_pl=n_pl, n_actions_op=n_op)


class TestForward:
    def test_zero_weights_zero_output(self):
        p = tiny_net()
        for w in p.weights:
            w[...] = 0.0
        for b in p.biases:
            b[...] = 0.0
        out = forward(p, np.ones(3))
        np.testing.assert_array_equal(out, np.zeros((2, 2)))

    def test_output_head_is_81_units(self):
        p = QNetworkParams.init(0)  # default Pong head
        assert p.weights[-1].shape[1] == 81
        assert forward(p, np.zeros(13)).shape == (9, 9)

    def test_bitwise_reproducible(self):
        x = np.random.default_rng(5).normal(size=13)
        out1 = forward(QNetworkParams.init(7), x)
        out2 = forward(QNetworkParams.init(7), x)
        np.testing.assert_array_equal(out1, out2)

    def test_shape_mismatch_rejected(self):
        from softgames.errors import ConfigError

        with pytest.raises(ConfigError):
            forward(tiny_net(), np.zeros(5))


class TestSoftValueNet:
    def test_constant_matrix_value(self):
        p = tiny_net()
        for w in p.weights:
            w[...] = 0.0
        for b in p.biases:
            b[...] = 0.0
        p.biases[-1][...] = 3.25
        rat = RationalityParams.uniform(2, 2, 4.0, -7.0)
        assert soft_value_net(p, np.zeros(3), rat) == pytest.approx(3.25, abs=1e-12)

    def test_double_max_limit(self):
        p = QNetworkParams.init(3)
        rat = RationalityParams.uniform(9, 9, 1e4, 1e4)
        x = np.random.default_rng(0).normal(size=13)
        assert soft_value_net(p, x, rat) == pytest.approx(forward(p, x).max(), abs=1e-3)

    def test_matches_soft_core_oracle(self):
        rng = np.random.default_rng(42)
        for i in range(100):
            p = QNetworkParams.init(i, hidden=(13, 16), n_actions_pl=3, n_actions_op=4)
            rat = RationalityParams.uniform(3, 4, rng.uniform(-20, 20), rng.uniform(-20, 20))
            x = rng.normal(size=13)
            mat = forward(p, x)
            expected = soft.soft_value_from_marginal(
                soft.matrix_marginal_player(mat, rat), rat
            )
            assert soft_value_net(p, x, rat) == pytest.approx(expected, abs=1e-12)


def make_batch(rng, n, dim=3, n_pl=2, n_op=2, terminal_frac=0.0):
    states = rng.normal(size=(n, dim))
    a_pl = rng.integers(0, n_pl, size=n)
    a_op = rng.integers(0, n_op, size=n)
    rewards = rng.normal(size=n)
    next_states = rng.normal(size=(n, dim))
    done = rng.random(n) < terminal_frac
    return states, a_pl, a_op, rewards, next_states, done


class TestLossBatch:
    rat = RationalityParams.uniform(2, 2, 3.0, -2.0)

    def test_zero_loss_when_already_consistent(self):
        p = tiny_net(1)
        target = sync_target(p)
        rng = np.random.default_rng(0)
        states, a_pl, a_op, _, next_states, _ = make_batch(rng, 8)
        out = np.array([forward(p, s) for s in states])
        v_next = np.array([soft_value_net(target.params, s, self.rat) for s in next_states])
        q_taken = out[np.arange(8), a_pl, a_op]
        rewards = q_taken - 0.9 * v_next  # make the residual exactly zero
        loss, grads = loss_batch(p, target, (states, a_pl, a_op, rewards, next_states,
                                             np.zeros(8, bool)), self.rat, gamma=0.9)
        assert loss == pytest.approx(0.0, abs=1e-20)
        for g in grads[0] + grads[1]:
            np.testing.assert_allclose(g, 0.0, atol=1e-12)

    def test_terminal_drops_bootstrap(self):
        p = tiny_net(2)
        target = sync_target(p)
        rng = np.random.default_rng(1)
        states, a_pl, a_op, rewards, next_states, _ = make_batch(rng, 4)
        done = np.ones(4, bool)
        loss, _ = loss_batch(p, target, (states, a_pl, a_op, rewards, next_states, done),
                             self.rat, gamma=0.9)
        out = np.array([forward(p, s) for s in states])
        q_taken = out[np.arange(4), a_pl, a_op]
        assert loss == pytest.approx(float(np.mean((q_taken - rewards) ** 2)), abs=1e-12)

    @pytest.mark.parametrize("hidden,n_pl,n_op", [((2, 1), 1, 1), ((3, 4, 3), 2, 2), ((13, 8), 3, 3)])
    def test_gradients_match_finite_differences(self, hidden, n_pl, n_op):
        p = QNetworkParams.init(9, hidden=hidden, n_actions_pl=n_pl, n_actions_op=n_op)
        target = sync_target(QNetworkParams.init(10, hidden=hidden,
                                                 n_actions_pl=n_pl, n_actions_op=n_op))
        rat = RationalityParams.uniform(n_pl, n_op, 2.0, -1.5)
        rng = np.random.default_rng(2)
        batch = make_batch(rng, 6, dim=hidden[0], n_pl=n_pl, n_op=n_op, terminal_frac=0.3)
        _, grads = loss_batch(p, target, batch, rat, gamma=0.9)
        flat_grads = np.concatenate([g.ravel() for g in grads[0] + grads[1]])
        theta0 = p.flat()

        def f(vec):
            p2 = p.copy()
            p2.load_flat(vec)
            loss, _ = loss_batch(p2, target, batch, rat, gamma=0.9)
            return loss

        rng2 = np.random.default_rng(3)
        idx = rng2.choice(theta0.size, size=min(25, theta0.size), replace=False)
        for i in idx:
            e = np.zeros_like(theta0)
            e[i] = 1.0
            fd = (f(theta0 + 1e-6 * e) - f(theta0 - 1e-6 * e)) / 2e-6
            scale = max(abs(fd), abs(flat_grads[i]), 1e-8)
            assert abs(flat_grads[i] - fd) / scale < 1e-5

    def test_empty_batch_rejected(self):
        p = tiny_net()
        with pytest.raises(ValueError):
            loss_batch(p, sync_target(p),
                       (np.zeros((0, 3)), np.zeros(0, int), np.zeros(0, int),
                        np.zeros(0), np.zeros((0, 3)), np.zeros(0, bool)),
                       self.rat, gamma=0.9)

    def test_loss_invariant_under_batch_permutation(self):
        p = tiny_net(4)
        target = sync_target(tiny_net(5))
        rng = np.random.default_rng(6)
        batch = make_batch(rng, 10)
        loss1, _ = loss_batch(p, target, batch, self.rat, gamma=0.9)
        perm = rng.permutation(10)
        shuffled = tuple(b[perm] for b in batch)
        loss2, _ = loss_batch(p, target, shuffled, self.rat, gamma=0.9)
        assert loss1 == pytest.approx(loss2, rel=1e-12)


class TestTargetSync:
    def test_post_sync_bitwise_identical(self):
        online = tiny_net(0)
        target = sync_target(online)
        x = np.ones(3)
        np.testing.assert_array_equal(forward(online, x), forward(target.params, x))

    def test_no_aliasing(self):
        online = tiny_net(0)
        target = sync_target(online)
        online.weights[0][...] += 1.0
        assert not np.allclose(online.weights[0], target.params.weights[0])

    def test_counter_resets(self):
        online = tiny_net(0)
        target = sync_target(online)
        target.steps_since_sync = 99
        sync_target(online, target)
        assert target.steps_since_sync == 0


class TestReplay:
    def test_uniform_sampling(self):
        mem = ReplayMemory(100, 2)
        for i in range(100):
            mem.push(np.full(2, i), 0, 0, float(i), np.zeros(2), False)
        rng = np.random.default_rng(0)
        counts = np.zeros(100)
        draws = 100_000
        for _ in range(draws // 50):
            idx_batch = mem.sample(50, rng)[3].astype(int)
            counts += np.bincount(idx_batch, minlength=100)
        freq = counts / draws
        sigma = math.sqrt(0.01 * 0.99 / draws)
        assert np.all(np.abs(freq - 0.01) < 3 * sigma + 1e-9)

    def test_ring_overwrite(self):
        mem = ReplayMemory(4, 1)
        for i in range(6):
            mem.push([i], 0, 0, i, [0], False)
        assert mem.size == 4
        assert set(mem.rewards.astype(int)) == {2, 3, 4, 5}

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            ReplayMemory(4, 1).sample(2, np.random.default_rng(0))


class TestAdam:
    def test_matches_reference_formulas(self):
        p = tiny_net(0)
        opt = AdamState.for_params(p)
        rng = np.random.default_rng(1)
        grads = ([rng.normal(size=w.shape) for w in p.weights],
                 [rng.normal(size=b.shape) for b in p.biases])
        w_before = p.weights[0].copy()
        g = grads[0][0]
        opt.step(p, grads, lr=0.01)
        m = 0.1 * g
        v = 0.001 * g * g
        expected = w_before - 0.01 * (m / 0.1) / (np.sqrt(v / 0.001) + 1e-8)
        np.testing.assert_allclose(p.weights[0], expected, atol=1e-12)


class TestTrainDeep:
    def test_frozen_replay_overfit(self):
        # 512 fixed transitions with non-trivial rewards, 500 steps: the
        # loss must at least halve from its initial value.
        rng = np.random.default_rng(0)
        p = QNetworkParams.init(0)
        target = sync_target(p)
        rat = RationalityParams.uniform(9, 9, 5.0, -5.0)
        mem = ReplayMemory(512, 13)
        env = PongEnv(seed=0)
        state = env.reset(seed=0)
        for _ in range(512):
            a_pl, a_op = int(rng.integers(9)), int(rng.integers(9))
            out = env.step(a_pl, a_op)
            mem.push(state.as_vector(), a_pl, a_op, float(rng.normal()),
                     out.next_state.as_vector(), out.terminal and out.info != "timeout")
            state = out.next_state if not out.terminal else env.reset(seed=1)
        opt = AdamState.for_params(p)
        losses = []
        for step in range(500):
            batch = mem.sample(32, rng)
            loss, grads = loss_batch(p, target, batch, rat, gamma=0.97)
            losses.append(loss)
            opt.step(p, grads, lr=3e-3)
        assert np.mean(losses[-20:]) <= 0.5 * losses[0]

    def test_train_deep_runs_and_is_deterministic(self):
        rat = RationalityParams.uniform(9, 9, 10.0, 5.0)
        cfg = DeepConfig(steps=300, rationality=rat, warmup=64, target_sync=100,
                         seed=3, eval_every=150)
        outs = []
        for _ in range(2):
            env = PongEnv(seed=3)
            params, metrics = train_deep(env, cfg)
            outs.append((params.flat(), [m.bellman_error for m in metrics]))
        np.testing.assert_array_equal(outs[0][0], outs[1][0])
        assert outs[0][1] == outs[1][1]


class TestNetworkCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        p = QNetworkParams.init(11)
        path = str(tmp_path / "net.json")
        save_network(p, path, seed=11, step=42)
        p2, manifest = load_network(path)
        assert manifest["step"] == 42
        for a, b in zip(p.weights + p.biases, p2.weights + p2.biases):
            np.testing.assert_array_equal(a, b)

    def test_sidecar_is_little_endian_float64(self, tmp_path):
        p = tiny_net(0)
        path = str(tmp_path / "net.json")
        save_network(p, path)
        raw = open(path + ".bin", "rb").read()
        first = np.frombuffer(raw, dtype="<f8", count=p.weights[0].size)
        np.testing.assert_array_equal(first.reshape(p.weights[0].shape), p.weights[0])
