"""Team capability specs, sampling, and the team CSV format.

A team file is a CSV whose header row declares the capability dimension and
team size (``m=2,n=3``); each following row is one team with per-agent
capability tuples flattened in agent order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from importlib import resources
from typing import List

import numpy as np


class TeamFileError(ValueError):
    pass


@dataclass
class TeamSpec:
    """Capabilities of one team: array of shape (n_agents, cap_dim)."""

    caps: np.ndarray

    def __post_init__(self):
        self.caps = np.asarray(self.caps, dtype=np.float64)
        if self.caps.ndim != 2:
            raise TeamFileError("team capabilities must be a 2-d array")

    @property
    def n(self) -> int:
        return self.caps.shape[0]

    @property
    def m(self) -> int:
        return self.caps.shape[1]


@dataclass
class TeamPool:
    train: List[TeamSpec] = field(default_factory=list)
    test: List[TeamSpec] = field(default_factory=list)


# Firefighting training robots: (douse radius, acceleration).
FIRE_TRAIN_POOL = np.array([
    [0.3, 1.0],
    [0.2, 2.0],
    [0.1, 3.0],
    [0.1, 3.0],
    [0.2, 2.0],
])


def fire_train_teams(n: int = 3) -> List[TeamSpec]:
    """All size-n combinations of the firefighting training robot pool."""
    combos = itertools.combinations(range(len(FIRE_TRAIN_POOL)), n)
    return [TeamSpec(FIRE_TRAIN_POOL[list(idx)]) for idx in combos]


def sample_training_teams(task: str, count: int, rng: np.random.Generator,
                          n: int = None) -> List[TeamSpec]:
    """Sample in-distribution teams.

    Firefighting robots come from the discrete pool covering radius 0.1-0.3
    and acceleration 1-3; Mining agents get per-material capacities on a 0.1
    grid summing to 0.5.
    """
    teams = []
    if task == "firefighting":
        n = 3 if n is None else n
        pool = FIRE_TRAIN_POOL
        replace = n > len(pool)
        for _ in range(count):
            idx = rng.choice(len(pool), size=n, replace=replace)
            teams.append(TeamSpec(pool[idx]))
    elif task == "mining":
        n = 4 if n is None else n
        grid = np.round(np.arange(0.0, 0.51, 0.1), 1)
        for _ in range(count):
            cap1 = grid[rng.integers(0, len(grid), size=n)]
            teams.append(TeamSpec(np.stack([cap1, 0.5 - cap1], axis=1)))
    else:
        raise ValueError(f"unknown task: {task}")
    return teams


def save_team_file(path, teams: List[TeamSpec]):
    if not teams:
        raise TeamFileError("cannot save an empty team list")
    n, m = teams[0].n, teams[0].m
    lines = [f"m={m},n={n}"]
    for team in teams:
        if (team.n, team.m) != (n, m):
            raise TeamFileError("all teams in a file must share m and n")
        lines.append(",".join(repr(float(v)) for v in team.caps.ravel()))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_team_file(path) -> List[TeamSpec]:
    with open(path) as f:
        raw = f.read().splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw) if ln.strip()]
    if not lines:
        raise TeamFileError(f"{path}: empty team file")
    header_no, header = lines[0]
    try:
        fields = dict(part.split("=") for part in header.split(","))
        m, n = int(fields["m"]), int(fields["n"])
    except (ValueError, KeyError):
        raise TeamFileError(
            f"{path}:{header_no}: bad header {header!r}, expected 'm=M,n=N'")
    teams = []
    for line_no, line in lines[1:]:
        try:
            vals = np.array([float(v) for v in line.split(",")])
        except ValueError:
            raise TeamFileError(f"{path}:{line_no}: non-numeric entry")
        if vals.size != n * m:
            raise TeamFileError(
                f"{path}:{line_no}: expected {n * m} values, got {vals.size}")
        teams.append(TeamSpec(vals.reshape(n, m)))
    return teams


def builtin_team_path(name: str):
    """Path to a team file shipped with the package (see cashlab/data)."""
    return resources.files("cashlab").joinpath("data", name)


def load_builtin_teams(name: str) -> List[TeamSpec]:
    return load_team_file(builtin_team_path(name))
