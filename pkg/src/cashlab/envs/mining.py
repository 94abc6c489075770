"""Mining: robots with heterogeneous per-material carrying capacities shuttle
material from two deposit zones to a dropoff until both quotas are met."""

from __future__ import annotations

import numpy as np

from .base import DEPOT_JITTER, EnvError, StepResult, integrate, nearest_neighbor_slots
from .teams import TeamSpec

N_MATERIALS = 2
ZONE_POS = np.array([[-0.7, 0.7], [0.7, 0.7]])  # deposit zone per material
DROPOFF_POS = np.array([0.0, -0.7])
ZONE_RADIUS = 0.15
EPISODE_LIMIT = 128
QUOTA_PER_AGENT = 0.25
STEP_PENALTY = 0.01
MINING_ACCEL = 2.0  # all robots share a fixed acceleration capability

OBS_DIM = 18  # ego pos 2 + vel 2 + rel zones 4 + rel dropoff 2 + quotas 2 + teammates 6


class MiningEnv:
    """Capability columns: carrying capacity for material 1 and material 2."""

    n_actions = 5
    obs_dim = OBS_DIM
    cap_dim = 2

    def __init__(self, n_agents: int = 4, episode_limit: int = EPISODE_LIMIT):
        self.n_agents = n_agents
        self.episode_limit = episode_limit
        self._live = False

    def reset(self, team: TeamSpec, seed: int) -> np.ndarray:
        if team.n != self.n_agents or team.m != N_MATERIALS:
            raise EnvError(
                f"team shape ({team.n},{team.m}) does not match env "
                f"({self.n_agents},{N_MATERIALS})")
        rng = np.random.default_rng(seed)
        self.caps = team.caps.copy()
        self.pos = rng.uniform(-DEPOT_JITTER, DEPOT_JITTER, (self.n_agents, 2))
        self.vel = np.zeros((self.n_agents, 2))
        self.load = np.zeros((self.n_agents, N_MATERIALS))
        self.quota0 = QUOTA_PER_AGENT * self.n_agents
        self.deposited = np.zeros(N_MATERIALS)  # total mass delivered
        self.total_mined = np.zeros(N_MATERIALS)
        self.t = 0
        self.done = False
        self.success = False
        self._live = True
        return self.observations()

    @property
    def remaining_quota(self) -> np.ndarray:
        return np.maximum(0.0, self.quota0 - self.deposited)

    def step(self, actions) -> StepResult:
        if not self._live or self.done:
            raise EnvError("step() called on a finished or unreset episode")
        actions = np.asarray(actions, dtype=int)
        accel = np.full(self.n_agents, MINING_ACCEL)
        self.pos, self.vel = integrate(self.pos, self.vel, actions, accel)

        # auto-mine: inside zone k with free capacity -> fill to capacity
        for k in range(N_MATERIALS):
            dist = np.linalg.norm(self.pos - ZONE_POS[k], axis=1)
            inside = dist <= ZONE_RADIUS
            gain = np.where(inside, self.caps[:, k] - self.load[:, k], 0.0)
            gain = np.maximum(gain, 0.0)
            self.load[:, k] += gain
            self.total_mined[k] += float(np.sum(gain))

        # auto-deposit: inside dropoff -> unload everything
        before = self.remaining_quota.copy()
        dist = np.linalg.norm(self.pos - DROPOFF_POS, axis=1)
        inside = dist <= ZONE_RADIUS
        if np.any(inside):
            self.deposited += self.load[inside].sum(axis=0)
            self.load[inside] = 0.0
        newly_counted = float(np.sum(before - self.remaining_quota))

        self.t += 1
        reward = newly_counted - STEP_PENALTY
        self.success = bool(np.all(self.remaining_quota == 0.0))
        self.done = self.success or self.t >= self.episode_limit
        info = {"success": self.success, "makespan": self.t}
        return StepResult(self.observations(), reward, self.done, info)

    def observations(self) -> np.ndarray:
        quotas = self.remaining_quota
        obs = np.zeros((self.n_agents, OBS_DIM))
        for i in range(self.n_agents):
            obs[i] = np.concatenate([
                self.pos[i], self.vel[i],
                ZONE_POS[0] - self.pos[i], ZONE_POS[1] - self.pos[i],
                DROPOFF_POS - self.pos[i], quotas,
                nearest_neighbor_slots(self.pos, i)])
        return obs

    def global_state(self) -> np.ndarray:
        return np.concatenate([self.pos.ravel(), self.vel.ravel(),
                               self.load.ravel(), self.remaining_quota,
                               self.caps.ravel()])

    @property
    def state_dim(self) -> int:
        return (4 + 2 * N_MATERIALS) * self.n_agents + N_MATERIALS
