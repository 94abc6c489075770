"""Command line interface: ``cashlab train | eval | snd | report``.

Every command exits 0 on success and nonzero with a one-line reason on
stderr. ``train`` leaves a self-describing run directory behind: the resolved
``config.txt``, a ``metrics.csv`` learning log, and ``latest.ckpt`` /
``best.ckpt`` checkpoints.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .algos import (DaggerConfig, DaggerTrainer, MappoConfig, MappoTrainer,
                    QmixConfig, QmixTrainer, rollout_threads)
from .arch import ArchConfig, ConfigError, Policy
from .config import (apply_overrides, arch_config_from, default_config,
                     load_config, make_env_factory, save_config,
                     validate_config)
from .envs import EnvError, TeamFileError, load_team_file, builtin_team_path
from .evalmetrics import MetricError, evaluate
from .nn.checkpoint import CheckpointError, load_checkpoint, save_checkpoint

METRICS_HEADER = ("env_steps,update,return_mean,return_std,test_return_mean,"
                  "success_rate_id,success_rate_ood,snd,loss,lr,eps_or_beta")

USER_ERRORS = (ConfigError, MetricError, CheckpointError, TeamFileError,
               EnvError, FileNotFoundError, KeyError, ValueError)


def resolve_teams(name_or_path):
    """A filesystem path wins; otherwise the name refers to a shipped file."""
    if os.path.exists(name_or_path):
        return load_team_file(name_or_path)
    return load_team_file(builtin_team_path(name_or_path))


def resolve_config(args) -> dict:
    if args.config:
        cfg = load_config(args.config)
    elif args.algo and args.env and args.arch:
        cfg = default_config(args.algo, args.env, args.arch)
    else:
        raise ConfigError("need --config, or --algo/--env/--arch for defaults")
    cfg = apply_overrides(cfg, getattr(args, "set", None))
    if args.seed is not None:
        cfg["seed"] = args.seed
    return validate_config(cfg)


def build_trainer(cfg: dict):
    factory = make_env_factory(cfg)
    arch_cfg = arch_config_from(cfg)
    train_teams = resolve_teams(cfg["train_teams"])
    if cfg["arch"] == "indv":
        # one decoder per robot index: the team must stay fixed
        train_teams = [train_teams[cfg["indv_team_index"]]]
    envs = rollout_threads(cfg["rollout_envs"])
    algo, seed = cfg["algo"], cfg["seed"]
    if algo == "qmix":
        tcfg = QmixConfig(
            lr=cfg["learning_rate"],
            lr_linear_decay=cfg["learning_rate_linear_decay"],
            buffer_size=cfg["buffer_size"],
            batch_size=cfg["buffer_batch_size"],
            gamma=cfg["gamma"],
            td_lambda=cfg["td_lambda"] if cfg["td_lambda_loss"] else 0.0,
            epsilon_start=cfg["epsilon_start"],
            epsilon_finish=cfg["epsilon_finish"],
            epsilon_anneal_time=cfg["epsilon_anneal_time"],
            mixer_embedding_dim=cfg["mixer_embedding_dim"],
            mixer_hypernet_hidden=cfg["mixer_hypernetwork_hidden_dim"],
            mixer_init_scale=cfg["mixer_initialization_scale"],
            max_grad_norm=cfg["max_gradient_norm"],
            target_update_interval=cfg["target_update_interval"],
            adam_eps=cfg["epsilon_adam"],
            weight_decay=cfg["weight_decay_adam"],
            total_timesteps=cfg["total_timesteps"],
            double_q=cfg["double_q"],
            rollout_envs=envs,
            updates_per_cycle=cfg["updates_per_cycle"],
            eval_interval=cfg["eval_interval"],
        )
        trainer = QmixTrainer(factory, arch_cfg, tcfg, train_teams, seed)
    elif algo == "mappo":
        tcfg = MappoConfig(
            total_timesteps=cfg["total_timesteps"],
            lr=cfg["learning_rate"],
            anneal_lr=cfg["anneal_learning_rate"],
            update_epochs=cfg["update_epochs"],
            num_minibatches=cfg["number_of_minibatches"],
            gamma=cfg["gamma"],
            gae_lambda=cfg["gae_lambda"],
            clip_eps=cfg["clip_epsilon"],
            entropy_coef=cfg["entropy_coefficient"],
            value_coef=cfg["value_function_coefficient"],
            max_grad_norm=cfg["max_gradient_norm"],
            rollout_envs=envs,
            eval_interval=cfg["eval_interval"],
        )
        trainer = MappoTrainer(factory, arch_cfg, tcfg, train_teams, seed)
    else:
        tcfg = DaggerConfig(
            expert_buffer_size=cfg["expert_buffer_size"],
            initial_expert_trajectories=cfg["initial_expert_trajectories"],
            iterations=cfg["iterations"],
            trajectories_per_iteration=cfg["trajectories_per_iteration"],
            lr=cfg["learning_rate"],
            lr_linear_decay=cfg["learning_rate_linear_decay"],
            beta=cfg["beta"],
            beta_linear_decay=cfg["beta_linear_decay"],
            updates_per_iteration=cfg["updates_per_iteration"],
            update_batch_size=cfg["update_batch_size"],
            max_grad_norm=cfg["max_gradient_norm"],
            adam_eps=cfg["epsilon_adam"],
            weight_decay=cfg["weight_decay_adam"],
        )
        trainer = DaggerTrainer(factory, arch_cfg, tcfg, train_teams, seed)
    return trainer, factory, arch_cfg, train_teams


def _save_trainer_checkpoint(path, trainer, arch_cfg, cfg):
    arrays = {name: t.data for name, t in trainer.store.items()}
    meta = {"arch": arch_cfg.to_dict(), "config": dict(cfg),
            "env_steps": int(trainer.env_steps)}
    save_checkpoint(path, arrays, meta)


def policy_from_checkpoint(path):
    arrays, meta = load_checkpoint(path)
    arch_cfg = ArchConfig.from_dict(meta["arch"])
    policy = Policy(arch_cfg, np.random.default_rng(0))
    for name, t in policy.params.items():
        if name not in arrays:
            raise CheckpointError(f"{path}: missing tensor {name}")
        if tuple(arrays[name].shape) != tuple(t.data.shape):
            raise CheckpointError(
                f"{path}: tensor {name} has shape {tuple(arrays[name].shape)}"
                f" but the model expects {tuple(t.data.shape)}")
        t.data[...] = arrays[name]
    return policy, meta


def _check_team_sizes(teams, arch_cfg: ArchConfig):
    for i, team in enumerate(teams):
        if team.n != arch_cfg.n_agents:
            raise ConfigError(
                f"team {i} has {team.n} robots but the policy was built for "
                f"{arch_cfg.n_agents}; capability tensor net.hyper inputs "
                f"would not match")


class _MetricsWriter:
    def __init__(self, path):
        self.path = path
        with open(path, "w") as f:
            f.write(METRICS_HEADER + "\n")

    def row(self, values):
        def fmt(v):
            return str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))
        with open(self.path, "a") as f:
            f.write(",".join(fmt(v) for v in values) + "\n")


def _eval_and_log(writer, trainer, cfg, factory, train_teams, test_teams,
                  eval_count, ret_mean, ret_std, loss, lr, eps_or_beta,
                  update):
    seed0 = 10_000_019 + eval_count * 7919
    rid = evaluate(trainer.policy, factory, train_teams,
                   cfg["train_eval_episodes"], seed0=seed0)
    rood = evaluate(trainer.policy, factory, test_teams,
                    cfg["train_eval_episodes"], seed0=seed0 + 1)
    writer.row([trainer.env_steps, update, ret_mean, ret_std,
                rid.aggregate["mean_return"], rid.aggregate["success_rate"],
                rood.aggregate["success_rate"], rid.aggregate["snd"],
                loss, lr, eps_or_beta])
    out_dir = os.path.dirname(writer.path)
    with open(os.path.join(out_dir, "eval_id.csv"), "w") as f:
        f.write(rid.to_text())
    with open(os.path.join(out_dir, "eval_ood.csv"), "w") as f:
        f.write(rood.to_text())
    return rid, rood


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    out = args.out
    os.makedirs(out, exist_ok=True)
    save_config(os.path.join(out, "config.txt"), cfg)
    trainer, factory, arch_cfg, train_teams = build_trainer(cfg)
    test_teams = resolve_teams(cfg["test_teams"])
    _check_team_sizes(train_teams + test_teams, arch_cfg)
    writer = _MetricsWriter(os.path.join(out, "metrics.csv"))
    best_return = -np.inf
    eval_count = 0

    def checkpoint(rid):
        nonlocal best_return
        _save_trainer_checkpoint(os.path.join(out, "latest.ckpt"), trainer,
                                 arch_cfg, cfg)
        if rid.aggregate["mean_return"] >= best_return:
            best_return = rid.aggregate["mean_return"]
            _save_trainer_checkpoint(os.path.join(out, "best.ckpt"), trainer,
                                     arch_cfg, cfg)

    if cfg["algo"] == "dagger":
        for _ in range(cfg["iterations"]):
            stats = trainer.run_iteration()
            rid, _ = _eval_and_log(
                writer, trainer, cfg, factory, train_teams, test_teams,
                eval_count, stats["return_mean"], stats["return_std"],
                stats["loss_mean"], cfg["learning_rate"], stats["beta"],
                update=trainer.iteration)
            checkpoint(rid)
            eval_count += 1
        return 0

    total = cfg["total_timesteps"]
    next_eval = cfg["eval_interval"]
    recent_returns = []
    loss = float("nan")
    while trainer.env_steps < total:
        episodes = trainer.collect_cycle()
        recent_returns.extend(float(ep.rewards.sum()) for ep in episodes)
        if cfg["algo"] == "qmix":
            if len(trainer.buffer) >= cfg["buffer_batch_size"]:
                for _ in range(cfg["updates_per_cycle"]):
                    loss = trainer.update()
            lr, eob = trainer.current_lr(), trainer.current_epsilon()
        else:
            stats = trainer.update(episodes)
            loss = stats["pi_loss"] + cfg["value_function_coefficient"] * stats["v_loss"]
            lr, eob = trainer.current_lr(), 0.0
        if trainer.env_steps >= next_eval or trainer.env_steps >= total:
            ret = np.array(recent_returns) if recent_returns else np.array([np.nan])
            rid, _ = _eval_and_log(
                writer, trainer, cfg, factory, train_teams, test_teams,
                eval_count, float(ret.mean()), float(ret.std()), loss, lr,
                eob, update=trainer.updates)
            checkpoint(rid)
            eval_count += 1
            recent_returns = []
            while next_eval <= trainer.env_steps:
                next_eval += cfg["eval_interval"]
    return 0


def cmd_eval(args) -> int:
    policy, meta = policy_from_checkpoint(args.checkpoint)
    cfg = meta["config"]
    arch_cfg = ArchConfig.from_dict(meta["arch"])
    teams = resolve_teams(args.teams or cfg["test_teams"])
    _check_team_sizes(teams, arch_cfg)
    episodes = args.episodes if args.episodes is not None else cfg["eval_episodes"]
    report = evaluate(policy, make_env_factory(cfg), teams, episodes,
                      seed0=args.seed if args.seed is not None else 0)
    text = report.to_text()
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_snd(args) -> int:
    policy, meta = policy_from_checkpoint(args.checkpoint)
    cfg = meta["config"]
    arch_cfg = ArchConfig.from_dict(meta["arch"])
    teams = resolve_teams(args.teams or cfg["test_teams"])
    _check_team_sizes(teams, arch_cfg)
    episodes = args.episodes if args.episodes is not None else 4
    report = evaluate(policy, make_env_factory(cfg), teams, episodes,
                      seed0=args.seed if args.seed is not None else 0)
    lines = ["team,snd"]
    lines += [f"{row['team']},{row['snd']!r}" for row in report.rows]
    lines.append(f"aggregate,{report.aggregate['snd']!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_report(args) -> int:
    from .report import build_report
    written = build_report(args.runs, args.out,
                           metrics=args.metrics or None)
    for path in written["figures"] + written["tables"]:
        print(path)
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cashlab")
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train a policy and log metrics")
    tr.add_argument("--config", help="flat key=value config file")
    tr.add_argument("--algo", choices=("qmix", "mappo", "dagger"))
    tr.add_argument("--env", choices=("firefighting", "mining"))
    tr.add_argument("--arch",
                    choices=("cash", "rnn_imp", "rnn_exp", "rnn_id", "indv"))
    tr.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="override a config key")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--out", required=True, help="run directory")
    tr.set_defaults(func=cmd_train)

    for name, func, help_text in (
            ("eval", cmd_eval, "evaluate a checkpoint on a team file"),
            ("snd", cmd_snd, "behavioral diversity per team")):
        ev = sub.add_parser(name, help=help_text)
        ev.add_argument("--checkpoint", required=True)
        ev.add_argument("--teams", help="team file path or shipped file name")
        ev.add_argument("--episodes", type=int)
        ev.add_argument("--seed", type=int)
        ev.add_argument("--out")
        ev.set_defaults(func=func)

    rp = sub.add_parser("report", help="figures and tables from run dirs")
    rp.add_argument("runs", nargs="+", help="run directories")
    rp.add_argument("--out", required=True)
    rp.add_argument("--metrics", action="append",
                    help="metric column to plot (repeatable)")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
