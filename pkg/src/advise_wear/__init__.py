"""Q-learning with multi-trainer feedback shaping for wearable feature selection."""

from .consistency import TrainerEstimate, em_consistency, update_consistency
from .environment import EpisodeConfig, PowerModel, WearableEnv, episode_reward
from .errors import (
    AdviseError,
    ConfigError,
    EpisodeStateError,
    InvalidInputError,
    MetricsFileError,
    NoFeedbackError,
)
from .experiment import Arm, EpisodeMetrics, ExperimentConfig, run_experiment
from .rl import Action, QTable, RlHyperParams, State
from .shaping import FeedbackLedger, fuse_policies, multi_trainer_policy

__version__ = "0.1.0"
