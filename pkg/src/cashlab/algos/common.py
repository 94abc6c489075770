"""Shared trainer plumbing: schedules, returns, episode storage, rollouts."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..arch import Policy, teammate_caps
from ..nn import Tensor, no_grad
from ..nn.optim import linear_schedule
from ..nn.tensor import DTYPE

EPSILON_START = 1.0
EPSILON_FINISH = 0.05
EPSILON_ANNEAL_TIME = 100_000


def epsilon(t: int) -> float:
    """Exploration schedule: linear 1.0 -> 0.05 over the first 100k steps."""
    return linear_schedule(EPSILON_START, EPSILON_FINISH, EPSILON_ANNEAL_TIME, t)


def rollout_threads(default: int = 8) -> int:
    """Parallel rollout environment count, capped by CASHLAB_THREADS."""
    cap = os.environ.get("CASHLAB_THREADS")
    if cap:
        return max(1, min(default, int(cap)))
    return default


def td_lambda_targets(rewards: np.ndarray, q_next: np.ndarray, gamma: float,
                      lam: float) -> np.ndarray:
    """TD(lambda) targets for one episode that ends at its last step.

    y_t = r_t + gamma * ((1 - lam) * q_next[t] + lam * y_{t+1}), with a zero
    bootstrap after the final step.
    """
    rewards = np.asarray(rewards, dtype=DTYPE)
    q_next = np.asarray(q_next, dtype=DTYPE)
    T = rewards.shape[0]
    y = np.zeros(T, dtype=DTYPE)
    nxt = 0.0
    for t in range(T - 1, -1, -1):
        if t == T - 1:
            y[t] = rewards[t]
        else:
            y[t] = rewards[t] + gamma * ((1.0 - lam) * q_next[t] + lam * nxt)
        nxt = y[t]
    return y


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
        gamma: float = 0.99, lam: float = 0.95):
    """Generalized advantage estimation.

    values has length T+1 (includes the bootstrap value); returns
    (advantages, returns) of length T where returns = advantages + values[:T].
    """
    rewards = np.asarray(rewards, dtype=DTYPE)
    values = np.asarray(values, dtype=DTYPE)
    dones = np.asarray(dones, dtype=DTYPE)
    T = rewards.shape[0]
    adv = np.zeros(T, dtype=DTYPE)
    running = 0.0
    for t in range(T - 1, -1, -1):
        nonterm = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * nonterm - values[t]
        running = delta + gamma * lam * nonterm * running
        adv[t] = running
    return adv, adv + values[:T]


@dataclass
class Episode:
    """One complete episode of one team."""

    obs: np.ndarray       # [T+1, n, obs_dim]
    state: np.ndarray     # [T+1, state_dim]
    caps: np.ndarray      # [n, m]
    actions: np.ndarray   # [T, n] int
    rewards: np.ndarray   # [T]
    success: bool
    extra: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return self.rewards.shape[0]


class ReplayBuffer:
    """Ring buffer of complete episodes with uniform no-replacement sampling."""

    def __init__(self, capacity: int = 5000):
        self.capacity = capacity
        self._episodes: List[Episode] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._episodes)

    def add(self, episode: Episode):
        if len(self._episodes) < self.capacity:
            self._episodes.append(episode)
        else:
            self._episodes[self._next] = episode
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch: int, rng: np.random.Generator) -> List[Episode]:
        if not self._episodes:
            raise ValueError("cannot sample from an empty replay buffer")
        batch = min(batch, len(self._episodes))
        idx = rng.choice(len(self._episodes), size=batch, replace=False)
        return [self._episodes[i] for i in idx]


def stack_episodes(episodes: List[Episode]):
    """Pad a list of episodes to common length.

    Returns a dict of time-major arrays: obs [T+1,B,n,obs_dim], state
    [T+1,B,state], actions [T,B,n], rewards [T,B], mask [T,B] (1 on valid
    steps), caps [B,n,m].
    """
    B = len(episodes)
    T = max(ep.length for ep in episodes)
    n, obs_dim = episodes[0].obs.shape[1:]
    state_dim = episodes[0].state.shape[1]
    out = {
        "obs": np.zeros((T + 1, B, n, obs_dim), dtype=DTYPE),
        "state": np.zeros((T + 1, B, state_dim), dtype=DTYPE),
        "actions": np.zeros((T, B, n), dtype=np.int64),
        "rewards": np.zeros((T, B), dtype=DTYPE),
        "mask": np.zeros((T, B), dtype=DTYPE),
        "caps": np.stack([ep.caps for ep in episodes]),
    }
    for b, ep in enumerate(episodes):
        L = ep.length
        out["obs"][:L + 1, b] = ep.obs
        out["state"][:L + 1, b] = ep.state
        out["actions"][:L, b] = ep.actions
        out["rewards"][:L, b] = ep.rewards
        out["mask"][:L, b] = 1.0
    return out


def team_feature_rows(caps_batch: np.ndarray):
    """Per-row capability features for a batch of teams.

    caps_batch [B, n, m] -> (cap_self [B*n, m], cap_team [B*n, (n-1)m],
    agent_idx [B*n]); rows are ordered env-major, agent-minor.
    """
    B, n, m = caps_batch.shape
    cap_self = caps_batch.reshape(B * n, m)
    cap_team = np.stack([teammate_caps(caps_batch[b], i)
                         for b in range(B) for i in range(n)])
    agent_idx = np.tile(np.arange(n), B)
    return cap_self, cap_team, agent_idx


def greedy_actions(policy: Policy, obs_rows, cap_self, cap_team, agent_idx,
                   hidden: Tensor):
    """Argmax actions for a batch of rows (no exploration, no grad)."""
    with no_grad():
        out, h = policy.step(obs_rows, cap_self, cap_team, agent_idx, hidden)
    return np.argmax(out.data, axis=1), h


def run_episodes(envs, teams, seeds, act_fn) -> List[Episode]:
    """Step a batch of environments in lockstep until all are done.

    ``act_fn(step_index, obs_rows [E*n, obs_dim], live_mask [E]) -> actions
    [E, n]``; rows for finished envs are still passed (frozen) so recurrent
    batch shapes stay fixed, but their actions are ignored.
    """
    E = len(envs)
    n = envs[0].n_agents
    obs = np.stack([env.reset(team, seed)
                    for env, team, seed in zip(envs, teams, seeds)])
    recs = [{"obs": [obs[e]], "state": [envs[e].global_state()], "actions": [],
             "rewards": [], "success": False, "done": False} for e in range(E)]
    t = 0
    while not all(r["done"] for r in recs):
        live = np.array([not r["done"] for r in recs])
        actions = act_fn(t, obs.reshape(E * n, -1), live)
        for e in range(E):
            if recs[e]["done"]:
                continue
            res = envs[e].step(actions[e])
            obs[e] = res.obs
            recs[e]["obs"].append(res.obs.copy())
            recs[e]["state"].append(envs[e].global_state())
            recs[e]["actions"].append(np.array(actions[e], dtype=np.int64))
            recs[e]["rewards"].append(res.reward)
            if res.done:
                recs[e]["done"] = True
                recs[e]["success"] = bool(res.info["success"])
        t += 1
    return [Episode(obs=np.stack(r["obs"]), state=np.stack(r["state"]),
                    caps=envs[e].caps.copy(),
                    actions=np.stack(r["actions"]),
                    rewards=np.array(r["rewards"], dtype=DTYPE),
                    success=r["success"])
            for e, r in enumerate(recs)]
