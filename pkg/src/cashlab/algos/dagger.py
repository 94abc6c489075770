"""DAgger: imitation with a decaying expert/learner action mixture."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from ..arch import ArchConfig, Policy
from ..experts import expert_actions
from ..nn import GradStore, OptimizerState, ParamStore, Tensor, adam_step, clip_grad_norm, no_grad
from ..nn import tensor as T
from ..nn.tensor import DTYPE
from .common import Episode, ReplayBuffer, stack_episodes, team_feature_rows


@dataclass
class DaggerConfig:
    expert_buffer_size: int = 10_000
    initial_expert_trajectories: int = 1000
    iterations: int = 10
    trajectories_per_iteration: int = 1000
    lr: float = 1e-4
    lr_linear_decay: bool = False
    beta: float = 1.0
    beta_linear_decay: bool = True
    updates_per_iteration: int = 100
    update_batch_size: int = 64
    max_grad_norm: float = 1.0
    adam_eps: float = 1e-3
    weight_decay: float = 0.0
    collect_envs: int = 50


def beta_schedule(cfg: DaggerConfig, iteration: int) -> float:
    """beta_k = 1 - k/K under linear decay, else the constant beta."""
    if not cfg.beta_linear_decay:
        return cfg.beta
    return max(0.0, cfg.beta * (1.0 - iteration / cfg.iterations))


class DaggerTrainer:
    def __init__(self, env_factory, arch_cfg: ArchConfig, cfg: DaggerConfig,
                 train_teams, seed: int):
        self.cfg = cfg
        self.arch_cfg = arch_cfg
        self.env_factory = env_factory
        self.train_teams = list(train_teams)
        probe = env_factory()
        self.n_agents = probe.n_agents

        self.store = ParamStore()
        self.policy = Policy(arch_cfg, np.random.default_rng([seed, 0]),
                             self.store)
        self.opt = OptimizerState(self.store, lr=cfg.lr, eps=cfg.adam_eps,
                                  weight_decay=cfg.weight_decay)
        self.buffer = ReplayBuffer(cfg.expert_buffer_size)
        self.rng_rollout = np.random.default_rng([seed, 2])
        self.rng_sample = np.random.default_rng([seed, 3])
        self.rng_teams = np.random.default_rng([seed, 4])
        self.iteration = 0
        self.updates = 0
        self.env_steps = 0
        self._episode_seed = seed * 1_000_003 + 31

    # ------------------------------------------------------------ collection

    def collect(self, n_trajectories: int, beta: float) -> List[Episode]:
        """Roll trajectories under the beta-mixture; labels are expert actions."""
        out = []
        while len(out) < n_trajectories:
            E = min(self.cfg.collect_envs, n_trajectories - len(out))
            out.extend(self._collect_batch(E, beta))
        for ep in out:
            self.buffer.add(ep)
            self.env_steps += ep.length
        return out

    def _collect_batch(self, E: int, beta: float) -> List[Episode]:
        envs = [self.env_factory() for _ in range(E)]
        team_idx = self.rng_teams.integers(0, len(self.train_teams), size=E)
        teams = [self.train_teams[i] for i in team_idx]
        n = self.n_agents
        caps = np.stack([t.caps for t in teams])
        cap_self, cap_team, agent_idx = team_feature_rows(caps)
        hidden = self.policy.init_hidden(E * n)
        obs = np.stack([env.reset(team, self._episode_seed + i)
                        for i, (env, team) in enumerate(zip(envs, teams))])
        self._episode_seed += E
        recs = [{"obs": [obs[e]], "state": [envs[e].global_state()],
                 "actions": [], "labels": [], "rewards": [], "success": False,
                 "done": False} for e in range(E)]
        while not all(r["done"] for r in recs):
            labels = np.stack([expert_actions(env) for env in envs])
            if beta >= 1.0:
                executed = labels.copy()
            else:
                with no_grad():
                    logits, hidden = self.policy.step(
                        obs.reshape(E * n, -1), cap_self, cap_team, agent_idx,
                        hidden)
                greedy = np.argmax(logits.data, axis=1).reshape(E, n)
                use_expert = self.rng_rollout.random(E) < beta  # one coin per team
                executed = np.where(use_expert[:, None], labels, greedy)
            for e in range(E):
                if recs[e]["done"]:
                    continue
                res = envs[e].step(executed[e])
                obs[e] = res.obs
                recs[e]["obs"].append(res.obs.copy())
                recs[e]["state"].append(envs[e].global_state())
                recs[e]["actions"].append(executed[e].astype(np.int64))
                recs[e]["labels"].append(labels[e].astype(np.int64))
                recs[e]["rewards"].append(res.reward)
                if res.done:
                    recs[e]["done"] = True
                    recs[e]["success"] = bool(res.info["success"])
        eps = []
        for e, r in enumerate(recs):
            ep = Episode(obs=np.stack(r["obs"]), state=np.stack(r["state"]),
                         caps=envs[e].caps.copy(),
                         actions=np.stack(r["actions"]),
                         rewards=np.array(r["rewards"], dtype=DTYPE),
                         success=r["success"])
            ep.extra["labels"] = np.stack(r["labels"])
            eps.append(ep)
        return eps

    # --------------------------------------------------------------- updates

    def update(self) -> float:
        """One cross-entropy update on a minibatch of stored episodes."""
        episodes = self.buffer.sample(self.cfg.update_batch_size,
                                      self.rng_sample)
        batch = stack_episodes(episodes)
        rows = team_feature_rows(batch["caps"])
        Tlen, B = batch["rewards"].shape
        n = self.n_agents
        labels = np.zeros((Tlen, B, n), dtype=np.int64)
        for b, ep in enumerate(episodes):
            labels[:ep.length, b] = ep.extra["labels"]
        mask = batch["mask"]
        hidden = self.policy.init_hidden(B * n)
        total = None
        for t in range(Tlen):
            obs_rows = batch["obs"][t].reshape(B * n, -1)
            logits, hidden = self.policy.step(obs_rows, rows[0], rows[1],
                                              rows[2], hidden)
            lp = T.gather(T.log_softmax(logits), labels[t].reshape(B * n))
            nll = T.mul(T.scale(lp, -1.0), Tensor(np.repeat(mask[t], n)))
            s = T.tsum(nll)
            total = s if total is None else T.add(total, s)
        loss = T.scale(total, 1.0 / (float(mask.sum()) * n))
        self.store.zero_grad()
        loss.backward()
        grads = GradStore(self.store).collect()
        clip_grad_norm(grads, self.cfg.max_grad_norm)
        adam_step(self.store, grads, self.opt, lr=self.cfg.lr)
        self.updates += 1
        return float(loss.data)

    def run_iteration(self) -> dict:
        """One DAgger round: collect at the current beta, then update."""
        if self.iteration == 0 and len(self.buffer) == 0:
            self.collect(self.cfg.initial_expert_trajectories, beta=1.0)
        beta = beta_schedule(self.cfg, self.iteration)
        episodes = self.collect(self.cfg.trajectories_per_iteration, beta)
        losses = [self.update() for _ in range(self.cfg.updates_per_iteration)]
        self.iteration += 1
        returns = np.array([ep.rewards.sum() for ep in episodes])
        return {"beta": beta, "loss_mean": float(np.mean(losses)),
                "loss_last": losses[-1],
                "return_mean": float(returns.mean()),
                "return_std": float(returns.std()),
                "episodes": len(episodes)}
