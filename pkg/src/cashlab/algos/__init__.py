from .common import (Episode, ReplayBuffer, epsilon, gae, greedy_actions,
                     rollout_threads, run_episodes, stack_episodes,
                     td_lambda_targets, team_feature_rows)
from .dagger import DaggerConfig, DaggerTrainer, beta_schedule
from .mappo import CentralCritic, GradientError, MappoConfig, MappoTrainer
from .qmix import Mixer, QmixConfig, QmixTrainer, qmix_mix

__all__ = [
    "Episode", "ReplayBuffer", "epsilon", "gae", "greedy_actions",
    "rollout_threads", "run_episodes", "stack_episodes", "td_lambda_targets",
    "team_feature_rows", "DaggerConfig", "DaggerTrainer", "beta_schedule",
    "CentralCritic", "GradientError", "MappoConfig", "MappoTrainer",
    "Mixer", "QmixConfig", "QmixTrainer", "qmix_mix",
]
