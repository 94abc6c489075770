"""QMIX: off-policy value decomposition with a monotonic state-conditioned mixer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..arch import ArchConfig, Policy
from ..nn import GradStore, OptimizerState, ParamStore, Tensor, adam_step, clip_grad_norm, no_grad
from ..nn import tensor as T
from ..nn.layers import Linear
from ..nn.optim import linear_schedule
from ..nn.tensor import DTYPE
from .common import (Episode, ReplayBuffer, run_episodes, stack_episodes,
                     td_lambda_targets, team_feature_rows)


@dataclass
class QmixConfig:
    lr: float = 0.005
    lr_linear_decay: bool = True
    buffer_size: int = 5000
    batch_size: int = 32
    gamma: float = 0.9
    td_lambda: float = 0.6
    epsilon_start: float = 1.0
    epsilon_finish: float = 0.05
    epsilon_anneal_time: int = 100_000
    mixer_embedding_dim: int = 32
    mixer_hypernet_hidden: int = 64
    mixer_init_scale: float = 1e-5
    max_grad_norm: float = 25.0
    target_update_interval: int = 200
    adam_eps: float = 1e-3
    weight_decay: float = 1e-5
    total_timesteps: int = 1_000_000
    double_q: bool = True
    rollout_envs: int = 8
    updates_per_cycle: int = 4
    eval_interval: int = 50_000


class Mixer:
    """Q_tot = w2(s)^T elu(W1(s) q + b1(s)) + V(s), weights through |.|."""

    def __init__(self, store: ParamStore, state_dim: int, n_agents: int,
                 rng: np.random.Generator, embed: int = 32, hidden: int = 64,
                 init_scale: float = 1e-5, prefix: str = "mixer"):
        self.n = n_agents
        self.embed = embed
        self.w1_a = Linear(store, f"{prefix}.w1.0", state_dim, hidden, rng)
        self.w1_b = Linear(store, f"{prefix}.w1.1", hidden, n_agents * embed,
                           rng, scale=init_scale)
        self.b1 = Linear(store, f"{prefix}.b1", state_dim, embed, rng,
                         scale=init_scale)
        self.w2_a = Linear(store, f"{prefix}.w2.0", state_dim, hidden, rng)
        self.w2_b = Linear(store, f"{prefix}.w2.1", hidden, embed, rng,
                           scale=init_scale)
        self.v_a = Linear(store, f"{prefix}.v.0", state_dim, embed, rng)
        self.v_b = Linear(store, f"{prefix}.v.1", embed, 1, rng,
                          scale=init_scale)

    def __call__(self, agent_qs: Tensor, state) -> Tensor:
        """agent_qs [B, n], state [B, state_dim] -> Q_tot [B]."""
        s = state if isinstance(state, Tensor) else Tensor(np.asarray(state, dtype=DTYPE))
        B = agent_qs.data.shape[0]
        w1 = T.absolute(self.w1_b(T.relu(self.w1_a(s))))
        w1 = T.reshape(w1, (B, self.n, self.embed))
        hidden = T.elu(T.add(T.bmm(agent_qs, w1), self.b1(s)))
        w2 = T.absolute(self.w2_b(T.relu(self.w2_a(s))))
        v = self.v_b(T.relu(self.v_a(s)))
        return T.add(T.tsum(T.mul(hidden, w2), axis=1),
                     T.reshape(v, (B,)))


def qmix_mix(agent_qs, state, mixer: Mixer) -> Tensor:
    return mixer(agent_qs, state)


class QmixTrainer:
    """Owns the online/target networks, replay buffer, and update rule."""

    def __init__(self, env_factory, arch_cfg: ArchConfig, cfg: QmixConfig,
                 train_teams, seed: int):
        self.cfg = cfg
        self.arch_cfg = arch_cfg
        self.env_factory = env_factory
        self.train_teams = list(train_teams)
        probe = env_factory()
        self.state_dim = probe.state_dim
        self.n_agents = probe.n_agents

        init_rng = np.random.default_rng([seed, 0])
        self.store = ParamStore()
        self.policy = Policy(arch_cfg, init_rng, self.store)
        self.mixer = Mixer(self.store, self.state_dim, self.n_agents, init_rng,
                           embed=cfg.mixer_embedding_dim,
                           hidden=cfg.mixer_hypernet_hidden,
                           init_scale=cfg.mixer_init_scale)
        tgt_rng = np.random.default_rng([seed, 1])
        self.target_store = ParamStore()
        self.target_policy = Policy(arch_cfg, tgt_rng, self.target_store)
        self.target_mixer = Mixer(self.target_store, self.state_dim,
                                  self.n_agents, tgt_rng,
                                  embed=cfg.mixer_embedding_dim,
                                  hidden=cfg.mixer_hypernet_hidden,
                                  init_scale=cfg.mixer_init_scale)
        self.target_store.copy_from(self.store)

        self.opt = OptimizerState(self.store, lr=cfg.lr, eps=cfg.adam_eps,
                                  weight_decay=cfg.weight_decay)
        self.buffer = ReplayBuffer(cfg.buffer_size)
        self.rng_rollout = np.random.default_rng([seed, 2])
        self.rng_sample = np.random.default_rng([seed, 3])
        self.rng_teams = np.random.default_rng([seed, 4])
        self.env_steps = 0
        self.updates = 0
        self._episode_seed = seed * 1_000_003

    # ------------------------------------------------------------- rollouts

    def collect_cycle(self):
        """Run one batch of epsilon-greedy episodes into the buffer."""
        E = self.cfg.rollout_envs
        envs = [self.env_factory() for _ in range(E)]
        team_idx = self.rng_teams.integers(0, len(self.train_teams), size=E)
        teams = [self.train_teams[i] for i in team_idx]
        seeds = [self._episode_seed + i for i in range(E)]
        self._episode_seed += E
        caps = np.stack([t.caps for t in teams])
        cap_self, cap_team, agent_idx = team_feature_rows(caps)
        n = self.n_agents
        hidden = self.policy.init_hidden(E * n)
        eps_now = self.current_epsilon()

        def act(t, obs_rows, live):
            nonlocal hidden
            with no_grad():
                out, hidden = self.policy.step(obs_rows, cap_self, cap_team,
                                               agent_idx, hidden)
            greedy = np.argmax(out.data, axis=1)
            explore = self.rng_rollout.random(E * n) < eps_now
            randoms = self.rng_rollout.integers(0, out.data.shape[1], size=E * n)
            return np.where(explore, randoms, greedy).reshape(E, n)

        episodes = run_episodes(envs, teams, seeds, act)
        for ep in episodes:
            self.buffer.add(ep)
            self.env_steps += ep.length
        return episodes

    # -------------------------------------------------------------- updates

    def _unroll(self, policy: Policy, batch, rows, grad: bool):
        """Q-values at every timestep: list of [B*n, A] tensors, t = 0..T."""
        obs = batch["obs"]
        Tlen, B = batch["rewards"].shape
        hidden = policy.init_hidden(B * self.n_agents)
        outs = []
        cap_self, cap_team, agent_idx = rows
        for t in range(Tlen + 1):
            obs_rows = obs[t].reshape(B * self.n_agents, -1)
            if grad:
                out, hidden = policy.step(obs_rows, cap_self, cap_team,
                                          agent_idx, hidden)
            else:
                with no_grad():
                    out, hidden = policy.step(obs_rows, cap_self, cap_team,
                                              agent_idx, hidden)
            outs.append(out)
        return outs

    def update(self) -> float:
        cfg = self.cfg
        episodes = self.buffer.sample(cfg.batch_size, self.rng_sample)
        batch = stack_episodes(episodes)
        rows = team_feature_rows(batch["caps"])
        Tlen, B = batch["rewards"].shape
        n = self.n_agents

        online = self._unroll(self.policy, batch, rows, grad=True)
        target = self._unroll(self.target_policy, batch, rows, grad=False)

        # Q_tot of the taken actions, with gradients
        qtots = []
        for t in range(Tlen):
            chosen = T.gather(online[t], batch["actions"][t].reshape(B * n))
            qtots.append(self.mixer(T.reshape(chosen, (B, n)), batch["state"][t]))

        # bootstrap values from the target net (double-Q action selection)
        qnext = np.zeros((Tlen, B))
        with no_grad():
            for t in range(Tlen):
                tgt = target[t + 1].data
                if cfg.double_q:
                    astar = np.argmax(online[t + 1].data, axis=1)
                    per_agent = tgt[np.arange(B * n), astar]
                else:
                    per_agent = tgt.max(axis=1)
                qnext[t] = self.target_mixer(
                    Tensor(per_agent.reshape(B, n)),
                    batch["state"][t + 1]).data

        targets = np.zeros((Tlen, B))
        lengths = batch["mask"].sum(axis=0).astype(int)
        for b in range(B):
            L = lengths[b]
            targets[:L, b] = td_lambda_targets(batch["rewards"][:L, b],
                                               qnext[:L, b], cfg.gamma,
                                               cfg.td_lambda)

        mask = batch["mask"]
        total = None
        for t in range(Tlen):
            err = T.square(T.add(qtots[t], Tensor(-targets[t])))
            err = T.mul(err, Tensor(mask[t]))
            s = T.tsum(err)
            total = s if total is None else T.add(total, s)
        loss = T.scale(total, 1.0 / float(mask.sum()))
        self.store.zero_grad()
        loss.backward()
        grads = GradStore(self.store).collect()
        clip_grad_norm(grads, cfg.max_grad_norm)
        lr = self.current_lr()
        adam_step(self.store, grads, self.opt, lr=lr)
        self.updates += 1
        if self.updates % cfg.target_update_interval == 0:
            self.target_store.copy_from(self.store)
        return float(loss.data)

    def current_epsilon(self) -> float:
        return linear_schedule(self.cfg.epsilon_start, self.cfg.epsilon_finish,
                               self.cfg.epsilon_anneal_time, self.env_steps)

    def current_lr(self) -> float:
        if not self.cfg.lr_linear_decay:
            return self.cfg.lr
        return linear_schedule(self.cfg.lr, 0.0, self.cfg.total_timesteps,
                               self.env_steps)
