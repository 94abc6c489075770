"""Firefighting: robots with heterogeneous douse radius and acceleration must
extinguish two fires before the time limit."""

from __future__ import annotations

import numpy as np

from .base import (ARENA, DEPOT_JITTER, EnvError, StepResult, integrate,
                   nearest_neighbor_slots)
from .teams import TeamSpec

N_FIRES = 2
DOUSE_RANGE = 0.15
DOUSE_RATE = 0.2          # strength removed per step = radius capability * this
FIRE_STRENGTH_LO = 0.2
FIRE_STRENGTH_HI = 0.3
EPISODE_LIMIT = 50
STRENGTH_PENALTY = 0.1
EXTINGUISH_BONUS = 5.0
SUCCESS_BONUS = 10.0

OBS_DIM = 16  # ego pos 2 + vel 2 + 2 fires x (rel pos 2 + strength 1) + 3 teammates x 2


class FirefightingEnv:
    """Capability columns: (douse radius, acceleration)."""

    n_actions = 5
    obs_dim = OBS_DIM
    cap_dim = 2

    def __init__(self, n_agents: int = 3, episode_limit: int = EPISODE_LIMIT):
        self.n_agents = n_agents
        self.episode_limit = episode_limit
        self._live = False

    def reset(self, team: TeamSpec, seed: int) -> np.ndarray:
        if team.n != self.n_agents or team.m != 2:
            raise EnvError(
                f"team shape ({team.n},{team.m}) does not match env "
                f"({self.n_agents},2)")
        rng = np.random.default_rng(seed)
        self.caps = team.caps.copy()
        self.pos = rng.uniform(-DEPOT_JITTER, DEPOT_JITTER, (self.n_agents, 2))
        self.vel = np.zeros((self.n_agents, 2))
        self.fire_pos = rng.uniform(-ARENA, ARENA, (N_FIRES, 2))
        self.fire_strength = rng.uniform(FIRE_STRENGTH_LO, FIRE_STRENGTH_HI,
                                         N_FIRES)
        self.t = 0
        self.done = False
        self.success = False
        self._live = True
        return self.observations()

    def step(self, actions) -> StepResult:
        if not self._live or self.done:
            raise EnvError("step() called on a finished or unreset episode")
        actions = np.asarray(actions, dtype=int)
        self.pos, self.vel = integrate(self.pos, self.vel, actions,
                                       self.caps[:, 1])
        reward = 0.0
        for k in range(N_FIRES):
            if self.fire_strength[k] <= 0.0:
                continue
            dist = np.linalg.norm(self.pos - self.fire_pos[k], axis=1)
            douse = np.sum(self.caps[dist <= DOUSE_RANGE, 0]) * DOUSE_RATE
            if douse > 0.0:
                self.fire_strength[k] = max(0.0, self.fire_strength[k] - douse)
                if self.fire_strength[k] == 0.0:
                    reward += EXTINGUISH_BONUS
        self.t += 1
        reward -= STRENGTH_PENALTY * float(np.sum(self.fire_strength))
        self.success = bool(np.all(self.fire_strength == 0.0))
        if self.success:
            reward += SUCCESS_BONUS
        self.done = self.success or self.t >= self.episode_limit
        info = {"success": self.success, "makespan": self.t}
        return StepResult(self.observations(), reward, self.done, info)

    def observations(self) -> np.ndarray:
        obs = np.zeros((self.n_agents, OBS_DIM))
        for i in range(self.n_agents):
            fire_feats = np.concatenate(
                [np.concatenate([self.fire_pos[k] - self.pos[i],
                                 [self.fire_strength[k]]])
                 for k in range(N_FIRES)])
            obs[i] = np.concatenate([self.pos[i], self.vel[i], fire_feats,
                                     nearest_neighbor_slots(self.pos, i)])
        return obs

    def global_state(self) -> np.ndarray:
        return np.concatenate([self.pos.ravel(), self.vel.ravel(),
                               self.fire_pos.ravel(), self.fire_strength,
                               self.caps.ravel()])

    @property
    def state_dim(self) -> int:
        return 4 * self.n_agents + 3 * N_FIRES + 2 * self.n_agents
