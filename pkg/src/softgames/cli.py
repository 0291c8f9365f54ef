"""Command-line entry point.

Subcommands: solve, train, estimate, balance, deep-train, sweep, serve.
Configuration comes from an optional TOML (or manifest JSON) file via
--config, overridden by flags; every run writes manifest.json with the
fully resolved configuration and content hashes of its file inputs, and
re-running any subcommand with --config manifest.json reproduces the run.

CSV outputs
  metrics.csv   episode,mean_reward,bellman_error,beta_op_hat,beta_pl
  estimator.csv round,beta_op_hat,loss,grad,static_regret_avg
  balance.csv   episode,beta_op_hat,beta_pl,delta,avg_reward
  sweep.csv     beta_pl,beta_op,mean_reward,status

Exit codes: 0 success, 2 configuration error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version-dependent import
    import tomli as tomllib

from . import __version__, balancer, checkpoint, deep, estimator, learner
from .envs import CoarsePong, GameModelEnv, GridWorld, PongEnv, random_game
from .errors import ConfigError, DivergenceError
from .types import METRICS_HEADER, EstimatorState, JointQ, RationalityParams


def _default_seed() -> int:
    raw = os.environ.get("SOFTGAMES_SEED", "0")
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"SOFTGAMES_SEED must be an integer, got {raw!r}") from exc


def _load_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        # Manifests wrap the config under "config".
        return doc.get("config", doc)
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def _resolve(args: argparse.Namespace, keys: list[str]) -> dict:
    """File config overridden by explicitly passed flags."""
    cfg = {}
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        for k, v in file_cfg.items():
            cfg[k.replace("-", "_")] = v
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg.setdefault("seed", _default_seed())
    return cfg


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir: str, subcommand: str, cfg: dict) -> None:
    inputs = {}
    for key in ("checkpoint", "mapping"):
        path = cfg.get(key)
        if path and os.path.exists(path):
            inputs[key] = _sha256(path)
    manifest = {
        "tool": "softgames",
        "version": __version__,
        "subcommand": subcommand,
        "config": cfg,
        "input_hashes": inputs,
    }
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _make_env(cfg: dict, seed: int):
    name = cfg.get("env", "gridworld")
    if name == "gridworld":
        return GridWorld()
    if name == "pong":
        return PongEnv(seed=seed)
    if name == "coarse-pong":
        return CoarsePong(bins_per_dim=int(cfg.get("bins", 2)), seed=seed)
    if name == "random-game":
        model = random_game(
            int(cfg.get("game_seed", 0)),
            n_states=int(cfg.get("n_states", 4)),
            n_actions_pl=int(cfg.get("n_actions", 2)),
            n_actions_op=int(cfg.get("n_actions", 2)),
            gamma=float(cfg.get("gamma", 0.9)),
        )
        return GameModelEnv(model, episode_cap=int(cfg.get("episode_cap", 50)), seed=seed)
    raise ConfigError(f"unknown env {name!r}")


def _params_for(env, cfg: dict) -> RationalityParams:
    return RationalityParams.uniform(
        env.n_actions_pl, env.n_actions_op,
        float(cfg.get("beta_pl", 20.0)), float(cfg.get("beta_op", -5.0)),
    )


def _train_config(env, cfg: dict, params: RationalityParams) -> learner.TrainConfig:
    return learner.TrainConfig(
        episodes=int(cfg.get("episodes", 2000)),
        params=params,
        alpha=float(cfg.get("alpha", 0.5)),
        alpha2=float(cfg.get("alpha2", 2.0)),
        alpha2_decay=bool(cfg.get("alpha2_decay", False)),
        eval_every=int(cfg.get("eval_every", 100)),
        eval_episodes=int(cfg.get("eval_episodes", 30)),
        seed=int(cfg.get("seed", 0)),
        gamma=cfg.get("gamma"),
        stop_on_plateau=bool(cfg.get("stop_on_plateau", True)),
    )


def _metrics_rows(metrics):
    return [m.as_csv_row() for m in metrics]


def cmd_solve(args) -> int:
    cfg = _resolve(args, ["env", "beta_pl", "beta_op", "tol", "gamma", "out",
                          "game_seed", "n_states", "n_actions"])
    outdir = cfg.get("out", "out-solve")
    os.makedirs(outdir, exist_ok=True)
    env = _make_env(cfg, int(cfg["seed"]))
    if not hasattr(env, "as_game_model"):
        raise ConfigError("solve needs a tabular model env (gridworld or random-game)")
    model = env.as_game_model(cfg.get("gamma"))
    params = _params_for(env, cfg)
    from .soft import solve_value_iteration

    res = solve_value_iteration(model, params, tol=float(cfg.get("tol", 1e-9)))
    checkpoint.save_joint_q(res.q, model.gamma, os.path.join(outdir, "q.json"))
    _write_csv(os.path.join(outdir, "values.csv"), ["state", "value"],
               [[s, repr(float(v))] for s, v in enumerate(res.value.values)])
    _write_csv(
        os.path.join(outdir, "policy_player.csv"),
        ["state"] + [f"a{a}" for a in range(model.n_actions_pl)],
        [[s] + [repr(float(x)) for x in row] for s, row in enumerate(res.policy_pl.probs)],
    )
    _write_csv(
        os.path.join(outdir, "policy_opponent.csv"),
        ["state"] + [f"a{a}" for a in range(model.n_actions_op)],
        [[s] + [repr(float(x)) for x in row] for s, row in enumerate(res.policy_op.probs)],
    )
    _write_manifest(outdir, "solve", cfg)
    print(f"solved in {res.iterations} iterations (residual {res.residual:.3e}) -> {outdir}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args, ["env", "beta_pl", "beta_op", "alpha", "episodes", "eval_every",
                          "gamma", "out", "bins", "game_seed", "n_states", "n_actions"])
    outdir = cfg.get("out", "out-train")
    os.makedirs(outdir, exist_ok=True)
    env = _make_env(cfg, int(cfg["seed"]))
    params = _params_for(env, cfg)
    tc = _train_config(env, cfg, params)
    q, metrics = learner.train_tabular(env, tc)
    gamma = tc.gamma if tc.gamma is not None else env.gamma
    checkpoint.save_joint_q(q, gamma, os.path.join(outdir, "q.json"))
    if isinstance(env, CoarsePong) and not env.identity:
        with open(os.path.join(outdir, "mapping.json"), "w", encoding="utf-8") as fh:
            json.dump({str(k): v for k, v in env.mapping().items()}, fh)
    _write_csv(os.path.join(outdir, "metrics.csv"), METRICS_HEADER, _metrics_rows(metrics))
    _write_manifest(outdir, "train", cfg)
    print(f"trained {tc.episodes} episodes -> {outdir}")
    return 0


def cmd_estimate(args) -> int:
    cfg = _resolve(args, ["env", "beta_pl", "true_beta_op", "init", "alpha", "alpha2",
                          "episodes", "eval_every", "gamma", "out"])
    outdir = cfg.get("out", "out-estimate")
    os.makedirs(outdir, exist_ok=True)
    env = _make_env(cfg, int(cfg["seed"]))
    params = RationalityParams.uniform(
        env.n_actions_pl, env.n_actions_op,
        float(cfg.get("beta_pl", 10.0)), float(cfg.get("true_beta_op", 5.0)),
    )
    tc = _train_config(env, cfg, params)
    q, est, metrics = learner.train_tabular_with_estimation(
        env, tc, initial_beta_op_hat=float(cfg.get("init", 0.0))
    )
    gamma = tc.gamma if tc.gamma is not None else env.gamma
    checkpoint.save_joint_q(q, gamma, os.path.join(outdir, "q.json"))
    _write_csv(os.path.join(outdir, "metrics.csv"), METRICS_HEADER, _metrics_rows(metrics))

    grid = estimator.default_u_grid()
    rows = []
    cum_curve = np.zeros(grid.size)
    cum_loss = 0.0
    for j, ((qrows, actions), beta_j, loss, grad) in enumerate(
        zip(est.round_stats, est.beta_trace, est.loss_history, est.grad_history), start=1
    ):
        cum_curve += estimator._round_curve(qrows, actions, params.rho_op, grid)
        cum_loss += loss
        avg_regret = max(0.0, cum_loss - float(cum_curve.min())) / j
        rows.append([j, repr(float(beta_j)), repr(float(loss)), repr(float(grad)),
                     repr(float(avg_regret))])
    _write_csv(os.path.join(outdir, "estimator.csv"),
               ["round", "beta_op_hat", "loss", "grad", "static_regret_avg"], rows)
    _write_manifest(outdir, "estimate", cfg)
    print(f"final beta_op_hat {est.beta_op_hat:+.3f} after {est.round} rounds -> {outdir}")
    return 0


def cmd_balance(args) -> int:
    cfg = _resolve(args, ["env", "checkpoint", "mapping", "delta", "update_every",
                          "episodes", "beta_pl_model", "beta_op_model", "init",
                          "pretrain_episodes", "bins", "out", "no_balancing"])
    outdir = cfg.get("out", "out-balance")
    os.makedirs(outdir, exist_ok=True)
    seed = int(cfg["seed"])
    env = _make_env(cfg, seed)
    if not isinstance(env, (CoarsePong, GridWorld)):
        raise ConfigError("balance runs on coarse-pong or gridworld")
    opp_params = RationalityParams.uniform(
        env.n_actions_pl, env.n_actions_op,
        float(cfg.get("beta_pl_model", 50.0)), float(cfg.get("beta_op_model", -20.0)),
    )
    if cfg.get("checkpoint"):
        q, _ = checkpoint.load_joint_q(cfg["checkpoint"])
        if cfg.get("mapping") and isinstance(env, CoarsePong) and not env.identity:
            with open(cfg["mapping"], encoding="utf-8") as fh:
                env.load_mapping({int(k): v for k, v in json.load(fh).items()})
    else:
        tc = _train_config(env, {**cfg, "episodes": int(cfg.get("pretrain_episodes", 4000)),
                                 "stop_on_plateau": False}, opp_params)
        q, _ = learner.train_tabular(env, tc)
        checkpoint.save_joint_q(q, env.gamma, os.path.join(outdir, "pretrained_q.json"))

    est = EstimatorState(beta_op_hat=float(cfg.get("init", 0.0)),
                         alpha2=float(cfg.get("alpha2", 0.05)))
    update_every = cfg.get("update_every", 10)
    if cfg.get("no_balancing"):
        update_every = math.inf
    bc = balancer.BalanceConfig(delta=float(cfg.get("delta", 0.0)),
                                update_every=float(update_every))
    initial = float(cfg["beta_pl_model"]) if cfg.get("no_balancing") else None
    rows = balancer.balanced_play(env, q, est, bc, int(cfg.get("episodes", 500)),
                                  opponent_params=opp_params, seed=seed,
                                  initial_beta_pl=initial)
    _write_csv(os.path.join(outdir, "balance.csv"), balancer.BALANCE_HEADER,
               [r.as_csv_row() for r in rows])
    _write_manifest(outdir, "balance", cfg)
    print(f"balanced {len(rows)} episodes, final avg reward {rows[-1].avg_reward:+.3f} -> {outdir}")
    return 0


def cmd_deep_train(args) -> int:
    cfg = _resolve(args, ["beta_pl", "beta_op", "steps", "lr", "batch_size",
                          "target_sync", "replay_capacity", "gamma", "out"])
    outdir = cfg.get("out", "out-deep")
    os.makedirs(outdir, exist_ok=True)
    seed = int(cfg["seed"])
    env = PongEnv(seed=seed)
    rat = RationalityParams.uniform(9, 9, float(cfg.get("beta_pl", 20.0)),
                                    float(cfg.get("beta_op", -5.0)))
    dc = deep.DeepConfig(
        steps=int(cfg.get("steps", 20_000)),
        rationality=rat,
        batch_size=int(cfg.get("batch_size", 32)),
        lr=float(cfg.get("lr", 1e-4)),
        replay_capacity=int(cfg.get("replay_capacity", 50_000)),
        target_sync=int(cfg.get("target_sync", 30_000)),
        seed=seed,
        gamma=cfg.get("gamma"),
    )
    params, metrics = deep.train_deep(env, dc)
    deep.save_network(params, os.path.join(outdir, "network.json"), seed=seed, step=dc.steps,
                      extra={"beta_pl": rat.beta_pl, "beta_op": rat.beta_op})
    _write_csv(os.path.join(outdir, "metrics.csv"), METRICS_HEADER, _metrics_rows(metrics))
    _write_manifest(outdir, "deep-train", cfg)
    print(f"deep-trained {dc.steps} steps -> {outdir}")
    return 0


def _sweep_cell(payload):
    (cfg, beta_pl, beta_op) = payload
    try:
        env = _make_env(cfg, int(cfg["seed"]))
        params = RationalityParams.uniform(env.n_actions_pl, env.n_actions_op, beta_pl, beta_op)
        tc = _train_config(env, cfg, params)
        _, metrics = learner.train_tabular(env, tc)
        return (beta_pl, beta_op, metrics[-1].mean_reward, "ok")
    except Exception as exc:  # per-cell failures are recorded, not fatal
        return (beta_pl, beta_op, float("nan"), f"error: {exc}")


def cmd_sweep(args) -> int:
    cfg = _resolve(args, ["env", "alpha", "episodes", "eval_every", "gamma", "out", "workers"])
    if getattr(args, "beta_pl_grid", None):
        cfg["beta_pl_grid"] = [float(x) for x in args.beta_pl_grid.split(",") if x]
    if getattr(args, "beta_op_grid", None):
        cfg["beta_op_grid"] = [float(x) for x in args.beta_op_grid.split(",") if x]
    grid_pl = cfg.get("beta_pl_grid", [])
    grid_op = cfg.get("beta_op_grid", [])
    if not grid_pl or not grid_op:
        raise ConfigError("sweep needs non-empty beta_pl_grid and beta_op_grid")
    outdir = cfg.get("out", "out-sweep")
    os.makedirs(outdir, exist_ok=True)
    cells = [(cfg, float(bp), float(bo)) for bp in grid_pl for bo in grid_op]
    workers = int(cfg.get("workers", 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    results.sort(key=lambda r: (r[0], r[1]))
    _write_csv(os.path.join(outdir, "sweep.csv"),
               ["beta_pl", "beta_op", "mean_reward", "status"],
               [[repr(bp), repr(bo), repr(mr), st] for bp, bo, mr, st in results])
    _write_manifest(outdir, "sweep", cfg)
    print(f"swept {len(results)} cells -> {outdir}")
    return 0


def cmd_serve(args) -> int:
    cfg = _resolve(args, ["checkpoint", "mapping", "bind", "port", "tick_rate",
                          "delta", "bins", "beta_pl_model", "beta_op_model", "out"])
    if not cfg.get("checkpoint"):
        raise ConfigError("serve requires --checkpoint")
    from . import server

    app = server.build_app(server.ServerSettings.from_config(cfg))
    import uvicorn

    host = cfg.get("bind", "127.0.0.1")
    port = int(cfg.get("port", 8000))
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softgames",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="TOML config or a previous run's manifest.json")
        p.add_argument("--seed", type=int, help="default from SOFTGAMES_SEED, else 0")
        p.add_argument("--out", help="output directory")
        p.add_argument("--gamma", type=float)

    p = sub.add_parser("solve", help="exact value iteration; writes q.json, values.csv, policies")
    add_common(p)
    p.add_argument("--env", choices=["gridworld", "random-game"])
    p.add_argument("--beta-pl", dest="beta_pl", type=float)
    p.add_argument("--beta-op", dest="beta_op", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--game-seed", dest="game_seed", type=int)
    p.add_argument("--n-states", dest="n_states", type=int)
    p.add_argument("--n-actions", dest="n_actions", type=int)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", help="tabular self-play; writes metrics.csv and q.json")
    add_common(p)
    p.add_argument("--env", choices=["gridworld", "coarse-pong", "random-game"])
    p.add_argument("--beta-pl", dest="beta_pl", type=float)
    p.add_argument("--beta-op", dest="beta_op", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--episodes", type=int)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--game-seed", dest="game_seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate",
                       help="train while inferring the opponent temperature; writes estimator.csv")
    add_common(p)
    p.add_argument("--env", choices=["gridworld", "random-game"])
    p.add_argument("--beta-pl", dest="beta_pl", type=float)
    p.add_argument("--true-beta-op", dest="true_beta_op", type=float)
    p.add_argument("--init", type=float, help="initial beta_op estimate")
    p.add_argument("--alpha", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--episodes", type=int)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("balance", help="balanced play against a frozen policy; writes balance.csv")
    add_common(p)
    p.add_argument("--env", choices=["coarse-pong", "gridworld"])
    p.add_argument("--checkpoint", help="pre-trained joint-Q checkpoint (else pre-trains)")
    p.add_argument("--mapping", help="coarse state mapping JSON for coarse-pong checkpoints")
    p.add_argument("--delta", type=float)
    p.add_argument("--update-every", dest="update_every", type=float)
    p.add_argument("--episodes", type=int)
    p.add_argument("--beta-pl-model", dest="beta_pl_model", type=float)
    p.add_argument("--beta-op-model", dest="beta_op_model", type=float)
    p.add_argument("--init", type=float)
    p.add_argument("--pretrain-episodes", dest="pretrain_episodes", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--no-balancing", dest="no_balancing", action="store_const", const=True)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("deep-train", help="deep soft Q-learning on Pong; writes network.json")
    add_common(p)
    p.add_argument("--beta-pl", dest="beta_pl", type=float)
    p.add_argument("--beta-op", dest="beta_op", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--target-sync", dest="target_sync", type=int)
    p.add_argument("--replay-capacity", dest="replay_capacity", type=int)
    p.set_defaults(func=cmd_deep_train)

    p = sub.add_parser("sweep", help="grid over beta_pl x beta_op; writes sweep.csv heat-map data")
    add_common(p)
    p.add_argument("--env", choices=["gridworld", "coarse-pong", "random-game"])
    p.add_argument("--beta-pl-grid", help="comma-separated values")
    p.add_argument("--beta-op-grid", help="comma-separated values")
    p.add_argument("--alpha", type=float)
    p.add_argument("--episodes", type=int)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="websocket play service (see softgames.server)")
    add_common(p)
    p.add_argument("--checkpoint", help="joint-Q or network checkpoint")
    p.add_argument("--mapping")
    p.add_argument("--bind")
    p.add_argument("--port", type=int)
    p.add_argument("--tick-rate", dest="tick_rate", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--bins", type=int)
    p.add_argument("--beta-pl-model", dest="beta_pl_model", type=float)
    p.add_argument("--beta-op-model", dest="beta_op_model", type=float)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
