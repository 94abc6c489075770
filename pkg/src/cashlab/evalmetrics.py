"""Evaluation: success rate, makespan, return, and behavioral diversity (SND)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .algos.common import run_episodes, team_feature_rows
from .arch import Policy, teammate_caps
from .nn import Tensor, no_grad
from .nn import tensor as T
from .nn.tensor import DTYPE

SND_OBS_SAMPLE = 512


class MetricError(ValueError):
    pass


def tvd(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance between two categorical distributions."""
    p = np.asarray(p, dtype=DTYPE)
    q = np.asarray(q, dtype=DTYPE)
    for name, d in (("p", p), ("q", q)):
        if np.any(d < -1e-12):
            raise MetricError(f"{name} has negative entries")
        if abs(d.sum() - 1.0) > 1e-6:
            raise MetricError(f"{name} sums to {d.sum()}, not 1")
    return 0.5 * float(np.abs(p - q).sum())


def policy_distribution(policy: Policy, obs: np.ndarray, cap_self: np.ndarray,
                        cap_team: np.ndarray, agent_idx) -> np.ndarray:
    """Action distributions for a batch of observations, zero-hidden probe.

    Network outputs are treated as a categorical via softmax (temperature 1),
    which reads Q-values and logits uniformly.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=DTYPE))
    B = obs.shape[0]
    cap_self = np.broadcast_to(np.asarray(cap_self, dtype=DTYPE),
                               (B, np.asarray(cap_self).shape[-1]))
    cap_team = np.broadcast_to(np.asarray(cap_team, dtype=DTYPE),
                               (B, np.asarray(cap_team).shape[-1]))
    idx = np.broadcast_to(np.asarray(agent_idx, dtype=int), (B,))
    with no_grad():
        out, _ = policy.step(obs, cap_self, cap_team, idx,
                             policy.init_hidden(B))
        return T.softmax(out).data


def snd(policy: Policy, team, obs_set: np.ndarray) -> float:
    """Mean pairwise TVD between per-robot action distributions.

    Conditioning runs through the architecture's own capability pathway; the
    result is the mean of the strict upper triangle of the pairwise matrix.
    """
    caps = np.asarray(getattr(team, "caps", team), dtype=DTYPE)
    obs_set = np.asarray(obs_set, dtype=DTYPE)
    if obs_set.ndim != 2 or obs_set.shape[0] == 0:
        raise MetricError("observation set must be a nonempty [N, obs_dim] array")
    n = caps.shape[0]
    dists = [policy_distribution(policy, obs_set, caps[i],
                                 teammate_caps(caps, i), i)
             for i in range(n)]
    total, pairs = 0.0, 0
    for i in range(n):
        for j in range(i + 1, n):
            d = 0.5 * np.abs(dists[i] - dists[j]).sum(axis=1).mean()
            total += float(d)
            pairs += 1
    return total / pairs if pairs else 0.0


@dataclass
class EvalReport:
    rows: List[dict] = field(default_factory=list)  # one per team
    aggregate: dict = field(default_factory=dict)
    seeds: List[int] = field(default_factory=list)

    def to_text(self) -> str:
        cols = ["team", "episodes", "success_rate", "mean_makespan",
                "mean_return", "snd"]
        lines = [",".join(cols)]
        for row in self.rows:
            lines.append(",".join(str(row[c]) for c in cols))
        agg = self.aggregate
        lines.append(",".join(["aggregate", str(agg["episodes"]),
                               str(agg["success_rate"]),
                               str(agg["mean_makespan"]),
                               str(agg["mean_return"]), str(agg["snd"])]))
        return "\n".join(lines) + "\n"


def evaluate(policy: Policy, env_factory, teams, episodes_per_team: int,
             seed0: int = 0, snd_sample: int = SND_OBS_SAMPLE) -> EvalReport:
    """Greedy evaluation over ``episodes_per_team`` seeded episodes per team."""
    if episodes_per_team <= 0:
        raise MetricError("episodes_per_team must be positive")
    teams = list(teams)
    env_list, team_of_env, seeds = [], [], []
    for t_idx, team in enumerate(teams):
        for k in range(episodes_per_team):
            env_list.append(env_factory())
            team_of_env.append(t_idx)
            seeds.append(seed0 + t_idx * episodes_per_team + k)
    n = env_list[0].n_agents
    E = len(env_list)
    caps = np.stack([teams[t].caps for t in team_of_env])
    cap_self, cap_team, agent_idx = team_feature_rows(caps)
    hidden = policy.init_hidden(E * n)

    def act(t, obs_rows, live):
        nonlocal hidden
        with no_grad():
            out, hidden = policy.step(obs_rows, cap_self, cap_team, agent_idx,
                                      hidden)
        return np.argmax(out.data, axis=1).reshape(E, n)

    episodes = run_episodes(env_list, [teams[t] for t in team_of_env], seeds, act)

    limit = env_list[0].episode_limit
    all_obs = np.concatenate([ep.obs[:ep.length].reshape(-1, ep.obs.shape[-1])
                              for ep in episodes])
    sub_rng = np.random.default_rng(seed0)
    take = min(snd_sample, all_obs.shape[0])
    obs_set = all_obs[sub_rng.choice(all_obs.shape[0], size=take, replace=False)]

    rows = []
    for t_idx, team in enumerate(teams):
        eps = [ep for e, ep in enumerate(episodes) if team_of_env[e] == t_idx]
        succ = np.array([ep.success for ep in eps], dtype=float)
        mk = np.array([ep.length if ep.success else limit for ep in eps],
                      dtype=float)
        ret = np.array([ep.rewards.sum() for ep in eps])
        rows.append({
            "team": t_idx, "episodes": len(eps),
            "success_rate": float(succ.mean()),
            "mean_makespan": float(mk.mean()),
            "mean_return": float(ret.mean()),
            "snd": snd(policy, team, obs_set),
        })
    aggregate = {
        "episodes": sum(r["episodes"] for r in rows),
        "success_rate": float(np.mean([r["success_rate"] for r in rows])),
        "mean_makespan": float(np.mean([r["mean_makespan"] for r in rows])),
        "mean_return": float(np.mean([r["mean_return"] for r in rows])),
        "snd": float(np.mean([r["snd"] for r in rows])),
    }
    return EvalReport(rows=rows, aggregate=aggregate, seeds=seeds)
