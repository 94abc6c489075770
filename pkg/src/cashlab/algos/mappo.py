"""MAPPO: clipped multi-agent PPO with a centralized recurrent critic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..arch import ArchConfig, Policy
from ..nn import GradStore, OptimizerState, ParamStore, Tensor, adam_step, clip_grad_norm, no_grad
from ..nn import tensor as T
from ..nn.layers import GRUCell, Linear
from ..nn.optim import linear_schedule
from ..nn.tensor import DTYPE
from .common import (Episode, gae, run_episodes, stack_episodes,
                     team_feature_rows)


class GradientError(FloatingPointError):
    pass


@dataclass
class MappoConfig:
    total_timesteps: int = 10_000_000
    lr: float = 2e-3
    anneal_lr: bool = True
    update_epochs: int = 4
    num_minibatches: int = 4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    rollout_envs: int = 8
    eval_interval: int = 50_000


class CentralCritic:
    """RNN critic over [joint observations | all capabilities] -> V(s)."""

    def __init__(self, store: ParamStore, in_dim: int, width: int,
                 rng: np.random.Generator, prefix: str = "critic"):
        self.fc = Linear(store, f"{prefix}.fc", in_dim, width, rng)
        self.gru = GRUCell(store, f"{prefix}.gru", width, width, rng)
        self.head = Linear(store, f"{prefix}.head", width, 1, rng)
        self.width = width

    def step(self, x: Tensor, hidden: Tensor):
        h = self.gru(T.relu(self.fc(x)), hidden)
        return T.reshape(self.head(h), (x.data.shape[0],)), h


class MappoTrainer:
    def __init__(self, env_factory, arch_cfg: ArchConfig, cfg: MappoConfig,
                 train_teams, seed: int):
        self.cfg = cfg
        self.arch_cfg = arch_cfg
        self.env_factory = env_factory
        self.train_teams = list(train_teams)
        probe = env_factory()
        self.n_agents = probe.n_agents
        self.obs_dim = probe.obs_dim
        critic_in = probe.obs_dim * self.n_agents + self.n_agents * arch_cfg.cap_dim

        init_rng = np.random.default_rng([seed, 0])
        self.store = ParamStore()
        self.policy = Policy(arch_cfg, init_rng, self.store)
        self.critic = CentralCritic(self.store, critic_in, arch_cfg.rnn_width,
                                    init_rng)
        self.opt = OptimizerState(self.store, lr=cfg.lr, eps=1e-8,
                                  weight_decay=0.0)
        self.rng_rollout = np.random.default_rng([seed, 2])
        self.rng_update = np.random.default_rng([seed, 3])
        self.rng_teams = np.random.default_rng([seed, 4])
        self.env_steps = 0
        self.updates = 0
        self._episode_seed = seed * 1_000_003 + 17

    # ------------------------------------------------------------- rollouts

    def _critic_input(self, obs_envs: np.ndarray, caps: np.ndarray) -> np.ndarray:
        """obs_envs [E, n, D], caps [E, n, m] -> [E, n*D + n*m]."""
        E = obs_envs.shape[0]
        return np.concatenate([obs_envs.reshape(E, -1),
                               caps.reshape(E, -1)], axis=1)

    def collect_cycle(self):
        cfg = self.cfg
        E = cfg.rollout_envs
        envs = [self.env_factory() for _ in range(E)]
        team_idx = self.rng_teams.integers(0, len(self.train_teams), size=E)
        teams = [self.train_teams[i] for i in team_idx]
        seeds = [self._episode_seed + i for i in range(E)]
        self._episode_seed += E
        caps = np.stack([t.caps for t in teams])
        rows = team_feature_rows(caps)
        n = self.n_agents
        hidden = self.policy.init_hidden(E * n)
        c_hidden = Tensor(np.zeros((E, self.critic.width), dtype=DTYPE))
        logps = [[] for _ in range(E)]
        values = [[] for _ in range(E)]

        def act(t, obs_rows, live):
            nonlocal hidden, c_hidden
            with no_grad():
                logits, hidden = self.policy.step(obs_rows, rows[0], rows[1],
                                                  rows[2], hidden)
                probs = T.softmax(logits).data
                v, c_hidden = self.critic.step(
                    Tensor(self._critic_input(obs_rows.reshape(E, n, -1), caps)),
                    c_hidden)
            u = self.rng_rollout.random((E * n, 1))
            actions = (np.cumsum(probs, axis=1) < u).sum(axis=1)
            actions = np.minimum(actions, probs.shape[1] - 1)
            lp = np.log(probs[np.arange(E * n), actions] + 1e-45)
            for e in range(E):
                if live[e]:
                    logps[e].append(lp[e * n:(e + 1) * n])
                    values[e].append(float(v.data[e]))
            return actions.reshape(E, n)

        episodes = run_episodes(envs, teams, seeds, act)
        for e, ep in enumerate(episodes):
            ep.extra["logp"] = np.stack(logps[e][:ep.length])
            ep.extra["values"] = np.array(values[e][:ep.length], dtype=DTYPE)
            self.env_steps += ep.length
        return episodes

    # -------------------------------------------------------------- updates

    def current_lr(self) -> float:
        if not self.cfg.anneal_lr:
            return self.cfg.lr
        return linear_schedule(self.cfg.lr, 0.0, self.cfg.total_timesteps,
                               self.env_steps)

    def update(self, episodes) -> dict:
        cfg = self.cfg
        n = self.n_agents
        advs, rets = [], []
        for ep in episodes:
            L = ep.length
            vals = np.concatenate([ep.extra["values"], [0.0]])
            dones = np.zeros(L)
            dones[-1] = 1.0
            a, r = gae(ep.rewards, vals, dones, cfg.gamma, cfg.gae_lambda)
            advs.append(a)
            rets.append(r)
        flat = np.concatenate(advs)
        mu, sd = flat.mean(), flat.std()
        advs = [(a - mu) / (sd + 1e-8) for a in advs]

        stats = {"pi_loss": 0.0, "v_loss": 0.0, "entropy": 0.0, "count": 0}
        order = np.arange(len(episodes))
        for _ in range(cfg.update_epochs):
            self.rng_update.shuffle(order)
            for chunk in np.array_split(order, cfg.num_minibatches):
                if chunk.size == 0:
                    continue
                self._minibatch_step([episodes[i] for i in chunk],
                                     [advs[i] for i in chunk],
                                     [rets[i] for i in chunk], stats)
        self.updates += 1
        for k in ("pi_loss", "v_loss", "entropy"):
            stats[k] /= max(1, stats["count"])
        return stats

    def _minibatch_step(self, episodes, advs, rets, stats):
        cfg = self.cfg
        n = self.n_agents
        batch = stack_episodes(episodes)
        rows = team_feature_rows(batch["caps"])
        Tlen, B = batch["rewards"].shape
        mask = batch["mask"]
        adv_arr = np.zeros((Tlen, B))
        ret_arr = np.zeros((Tlen, B))
        logp_old = np.zeros((Tlen, B, n))
        for b, ep in enumerate(episodes):
            L = ep.length
            adv_arr[:L, b] = advs[b]
            ret_arr[:L, b] = rets[b]
            logp_old[:L, b] = ep.extra["logp"]

        hidden = self.policy.init_hidden(B * n)
        c_hidden = Tensor(np.zeros((B, self.critic.width), dtype=DTYPE))
        surr_sum = vloss_sum = ent_sum = None
        for t in range(Tlen):
            obs_rows = batch["obs"][t].reshape(B * n, -1)
            logits, hidden = self.policy.step(obs_rows, rows[0], rows[1],
                                              rows[2], hidden)
            logp_all = T.log_softmax(logits)
            lp = T.gather(logp_all, batch["actions"][t].reshape(B * n))
            ratio = T.exp(T.add(lp, Tensor(-logp_old[t].reshape(B * n))))
            adv_t = np.repeat(adv_arr[t], n)
            m_t = np.repeat(mask[t], n)
            unclipped = T.mul(ratio, Tensor(adv_t))
            clipped = T.mul(T.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps),
                            Tensor(adv_t))
            surr = T.mul(T.minimum(unclipped, clipped), Tensor(m_t))
            ent = T.mul(T.scale(T.tsum(T.mul(T.exp(logp_all), logp_all), axis=1),
                                -1.0), Tensor(m_t))
            v, c_hidden = self.critic.step(
                Tensor(self._critic_input(batch["obs"][t], batch["caps"])),
                c_hidden)
            verr = T.mul(T.square(T.add(v, Tensor(-ret_arr[t]))), Tensor(mask[t]))
            surr_sum = T.tsum(surr) if surr_sum is None else T.add(surr_sum, T.tsum(surr))
            ent_sum = T.tsum(ent) if ent_sum is None else T.add(ent_sum, T.tsum(ent))
            vloss_sum = T.tsum(verr) if vloss_sum is None else T.add(vloss_sum, T.tsum(verr))

        rows_valid = float(mask.sum()) * n
        steps_valid = float(mask.sum())
        pi_loss = T.scale(surr_sum, -1.0 / rows_valid)
        ent_mean = T.scale(ent_sum, 1.0 / rows_valid)
        v_loss = T.scale(vloss_sum, 1.0 / steps_valid)
        loss = T.add(T.add(pi_loss, T.scale(v_loss, cfg.value_coef)),
                     T.scale(ent_mean, -cfg.entropy_coef))
        if not np.isfinite(loss.data):
            raise GradientError(
                f"non-finite MAPPO loss: pi={pi_loss.data} v={v_loss.data} "
                f"ent={ent_mean.data}")
        self.store.zero_grad()
        loss.backward()
        grads = GradStore(self.store).collect()
        clip_grad_norm(grads, cfg.max_grad_norm)
        adam_step(self.store, grads, self.opt, lr=self.current_lr())
        stats["pi_loss"] += float(pi_loss.data)
        stats["v_loss"] += float(v_loss.data)
        stats["entropy"] += float(ent_mean.data)
        stats["count"] += 1
