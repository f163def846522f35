"""Simulated host-side trainers (PIR-like, RGB-D-like) and the feedback rule."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .errors import InvalidInputError
from .rl import Action

Feedback = Tuple[Action, bool]


@dataclass(frozen=True)
class TrainerModel:
    """A sensor classifier on the host with a planted accuracy.

    ``feedback_prob`` < 1 makes the trainer skip some steps entirely.
    """

    name: str
    accuracy: float
    feedback_prob: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.accuracy <= 1.0):
            raise InvalidInputError(f"trainer {self.name!r}: accuracy must be in [0, 1]")
        if not (0.0 <= self.feedback_prob <= 1.0):
            raise InvalidInputError(f"trainer {self.name!r}: feedback_prob must be in [0, 1]")


def default_trainers() -> List[TrainerModel]:
    return [TrainerModel("rgbd", 0.9), TrainerModel("pir", 0.75)]


def trainer_classify(
    tm: TrainerModel, true_label: int, rng: random.Random, num_activities: int
) -> int:
    """True label with probability ``tm.accuracy``, else a uniformly chosen other label."""
    if not (0 <= true_label < num_activities):
        raise InvalidInputError(f"label {true_label} out of range")
    hit = rng.random() < tm.accuracy
    other = rng.randrange(num_activities - 1)
    if hit:
        return true_label
    return other if other < true_label else other + 1


def generate_feedback(
    c_trainer: int,
    c_low: int,
    c_high: Optional[int],
    power_so_far: float,
    p_tgt: float,
) -> List[Feedback]:
    """Compare the trainer's label against the wearable's classifications.

    Low set agrees: approve low, disapprove high. Otherwise, if the high set
    was computed, agrees, and the episode is still under budget: approve
    high. Anything else produces no feedback.
    """
    if c_low == c_trainer:
        return [(Action.LOW, True), (Action.HIGH, False)]
    if c_high is not None and c_high == c_trainer and power_so_far < p_tgt:
        return [(Action.HIGH, True)]
    return []
