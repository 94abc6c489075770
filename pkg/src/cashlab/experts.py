"""Centralized scripted experts for both tasks, used as imitation supervisors.

Movement uses a one-step lookahead under the exact environment dynamics: the
chosen action minimizes the predicted next distance to the target, which
makes the controller brake against momentum instead of overshooting.
"""

from __future__ import annotations

import itertools

import numpy as np

from .envs.base import ACCEL_GAIN, ACTION_VECS, ARENA, DAMPING, DT
from .envs.firefighting import DOUSE_RANGE, FirefightingEnv
from .envs.mining import DROPOFF_POS, MINING_ACCEL, ZONE_POS, ZONE_RADIUS, MiningEnv


def move_toward(pos: np.ndarray, vel: np.ndarray, accel_cap: float,
                target: np.ndarray) -> int:
    """Action minimizing predicted next distance to ``target``; ties keep no-op."""
    best_a, best_d = 0, np.inf
    for a in range(len(ACTION_VECS)):
        nv = (vel + ACTION_VECS[a] * accel_cap * ACCEL_GAIN * DT) * DAMPING
        npos = np.clip(pos + nv * DT, -ARENA, ARENA)
        d = float(np.linalg.norm(npos - target))
        if d < best_d - 1e-12:
            best_a, best_d = a, d
    return best_a


def assign_fires(pos: np.ndarray, caps: np.ndarray, fire_pos: np.ndarray,
                 fire_strength: np.ndarray) -> np.ndarray:
    """Map each robot to a live fire.

    Minimizes total travel time (distance / acceleration) over all
    assignments that cover every live fire; among cost ties, prefers putting
    high-douse-radius robots on high-strength fires. Exhaustive for small
    teams, greedy repair above that.
    """
    n = pos.shape[0]
    live = [k for k in range(len(fire_strength)) if fire_strength[k] > 0.0]
    out = np.full(n, -1, dtype=int)
    if not live:
        return out
    travel = np.array([[np.linalg.norm(pos[i] - fire_pos[k]) / caps[i, 1]
                        for k in live] for i in range(n)])
    affinity = np.array([[caps[i, 0] * fire_strength[k] for k in live]
                         for i in range(n)])
    if n <= 5:
        best = None
        for combo in itertools.product(range(len(live)), repeat=n):
            if len(set(combo)) < len(live):
                continue  # every live fire needs at least one robot
            cost = sum(travel[i, c] for i, c in enumerate(combo))
            pref = sum(affinity[i, c] for i, c in enumerate(combo))
            key = (cost, -pref, combo)
            if best is None or key < best:
                best = key
        combo = best[2]
    else:
        combo = list(np.argmin(travel, axis=1))
        for j in range(len(live)):  # repair uncovered fires greedily
            if j not in combo:
                mover = int(np.argmin(
                    [travel[i, j] if combo.count(combo[i]) > 1 else np.inf
                     for i in range(n)]))
                combo[mover] = j
    for i in range(n):
        out[i] = live[combo[i]]
    return out


def expert_firefighting(env: FirefightingEnv) -> np.ndarray:
    targets = assign_fires(env.pos, env.caps, env.fire_pos, env.fire_strength)
    actions = np.zeros(env.n_agents, dtype=int)
    for i in range(env.n_agents):
        k = targets[i]
        if k < 0:
            continue
        dist = np.linalg.norm(env.pos[i] - env.fire_pos[k])
        if dist <= DOUSE_RANGE:
            # stay put if coasting keeps us in range, otherwise correct course
            nv = env.vel[i] * DAMPING
            npos = np.clip(env.pos[i] + nv * DT, -ARENA, ARENA)
            if np.linalg.norm(npos - env.fire_pos[k]) <= DOUSE_RANGE:
                continue
        actions[i] = move_toward(env.pos[i], env.vel[i], env.caps[i, 1],
                                 env.fire_pos[k])
    return actions


def mining_target_zone(caps_i: np.ndarray, remaining: np.ndarray) -> int:
    """Deposit zone of the robot's larger-capacity material among unmet quotas.

    Returns -1 when the robot cannot contribute to any unmet quota.
    """
    best = -1
    for k in range(len(remaining)):
        if remaining[k] > 0.0 and caps_i[k] > 0.0:
            if best < 0 or caps_i[k] > caps_i[best]:
                best = k
    return best


def expert_mining(env: MiningEnv) -> np.ndarray:
    remaining = env.remaining_quota
    actions = np.zeros(env.n_agents, dtype=int)
    for i in range(env.n_agents):
        if np.any(env.load[i] > 0.0):
            target = DROPOFF_POS
        else:
            k = mining_target_zone(env.caps[i], remaining)
            if k < 0:
                continue
            target = ZONE_POS[k]
        if np.linalg.norm(env.pos[i] - target) <= ZONE_RADIUS:
            nv = env.vel[i] * DAMPING
            npos = np.clip(env.pos[i] + nv * DT, -ARENA, ARENA)
            if np.linalg.norm(npos - target) <= ZONE_RADIUS:
                continue
        actions[i] = move_toward(env.pos[i], env.vel[i], MINING_ACCEL, target)
    return actions


def expert_actions(env) -> np.ndarray:
    if isinstance(env, FirefightingEnv):
        return expert_firefighting(env)
    if isinstance(env, MiningEnv):
        return expert_mining(env)
    raise TypeError(f"no expert for {type(env).__name__}")


def run_expert_episode(env, team, seed: int):
    """Roll one expert-controlled episode; returns (success, makespan, return)."""
    env.reset(team, seed)
    total, done, info = 0.0, False, {}
    while not done:
        res = env.step(expert_actions(env))
        total += res.reward
        done, info = res.done, res.info
    makespan = info["makespan"] if info["success"] else env.episode_limit
    return info["success"], makespan, total


def expert_success_rate(env, teams, episodes: int, seed0: int = 0):
    """Per-team expert success rates over ``episodes`` seeded episodes each."""
    rates = []
    for t_idx, team in enumerate(teams):
        wins = 0
        for ep in range(episodes):
            success, _, _ = run_expert_episode(env, team, seed0 + ep)
            wins += bool(success)
        rates.append(wins / episodes)
    return np.array(rates)
