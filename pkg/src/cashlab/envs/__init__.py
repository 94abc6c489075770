from .base import (ACTION_VECS, DT, DAMPING, ACCEL_GAIN, N_ACTIONS, EnvError,
                   StepResult, integrate, nearest_neighbor_slots,
                   trajectory_line)
from .firefighting import FirefightingEnv
from .mining import MiningEnv
from .teams import (FIRE_TRAIN_POOL, TeamFileError, TeamPool, TeamSpec,
                    builtin_team_path, fire_train_teams, load_builtin_teams,
                    load_team_file, sample_training_teams, save_team_file)

__all__ = [
    "ACTION_VECS", "DT", "DAMPING", "ACCEL_GAIN", "N_ACTIONS", "EnvError",
    "StepResult", "integrate", "nearest_neighbor_slots", "trajectory_line",
    "FirefightingEnv", "MiningEnv", "FIRE_TRAIN_POOL", "TeamFileError",
    "TeamPool", "TeamSpec", "builtin_team_path", "fire_train_teams",
    "load_builtin_teams", "load_team_file", "sample_training_teams",
    "save_team_file",
]
