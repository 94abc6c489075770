"""Shared pieces of the particle-world tasks: actions, movement, observations."""

from __future__ import annotations

import json
from typing import NamedTuple

import numpy as np

# Discrete movement actions shared by both tasks.
N_ACTIONS = 5
ACTION_VECS = np.array([
    [0.0, 0.0],   # no-op
    [1.0, 0.0],   # +x
    [-1.0, 0.0],  # -x
    [0.0, 1.0],   # +y
    [0.0, -1.0],  # -y
])

DT = 0.1
DAMPING = 0.75
ACCEL_GAIN = 5.0
ARENA = 1.0
DEPOT_JITTER = 0.05


class EnvError(RuntimeError):
    pass


class StepResult(NamedTuple):
    obs: np.ndarray
    reward: float
    done: bool
    info: dict


def integrate(pos: np.ndarray, vel: np.ndarray, actions: np.ndarray,
              accel_scale: np.ndarray):
    """One movement step: damped point-mass dynamics, positions clamped to the arena.

    ``accel_scale`` is the per-robot acceleration capability; the commanded
    acceleration is the action direction times ``accel_scale * ACCEL_GAIN``.
    Returns (new_pos, new_vel).
    """
    accel = ACTION_VECS[actions] * (accel_scale[:, None] * ACCEL_GAIN)
    new_vel = (vel + accel * DT) * DAMPING
    new_pos = np.clip(pos + new_vel * DT, -ARENA, ARENA)
    return new_pos, new_vel


def nearest_neighbor_slots(positions: np.ndarray, i: int) -> np.ndarray:
    """Relative positions of the 3 nearest teammates of robot ``i``.

    Slots are ordered by ascending Euclidean distance with ties broken by
    agent index; slots beyond the number of teammates are zero-filled.
    """
    n = positions.shape[0]
    rel = positions - positions[i]
    others = [j for j in range(n) if j != i]
    others.sort(key=lambda j: (float(np.linalg.norm(rel[j])), j))
    out = np.zeros(6)
    for slot, j in enumerate(others[:3]):
        out[2 * slot:2 * slot + 2] = rel[j]
    return out


def trajectory_line(timestep: int, positions: np.ndarray, actions,
                    reward: float, **extra) -> str:
    """One line-delimited trajectory record for debugging and plots."""
    rec = {"t": int(timestep),
           "pos": np.asarray(positions).round(6).tolist(),
           "actions": [int(a) for a in np.asarray(actions).ravel()],
           "reward": float(reward)}
    for key, val in extra.items():
        rec[key] = np.asarray(val).round(6).tolist()
    return json.dumps(rec)
