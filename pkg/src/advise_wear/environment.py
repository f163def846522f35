"""Episodic simulated smart home with a wearable choosing its feature set.

Activities follow a Markov chain (or a scripted label trace). Each step the
wearable always runs the low-power classifier; the high-power one only counts
when ``Action.HIGH`` was chosen. Both classifiers are simulated as noisy label
emitters: correct with a per-activity accuracy, otherwise uniform over the
remaining labels.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

from .errors import EpisodeStateError, InvalidInputError
from .rl import Action, State

NUM_ACTIVITIES = 20
# labels the low-power feature set recognises badly
DEFAULT_HARD_ACTIVITIES = (12, 13, 14, 15, 16, 17, 18, 19)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class PowerModel:
    """Per-step feature-extraction cost (mC) and the per-episode budget."""

    cost_low: float = 0.04
    cost_high: float = 0.20
    p_tgt: float = 16.7

    def __post_init__(self):
        if not (0.0 < self.cost_low < self.cost_high):
            raise InvalidInputError("need 0 < cost_low < cost_high")
        if not self.p_tgt > 0.0:
            raise InvalidInputError("p_tgt must be positive")

    def cost(self, action: Action) -> float:
        return self.cost_high if action == Action.HIGH else self.cost_low


@dataclass(frozen=True)
class EpisodeConfig:
    episode_length_min: int = 20
    step_seconds: int = 5
    lam: float = 1.0
    power_cap: int = 100

    def __post_init__(self):
        if self.episode_length_min <= 0 or self.step_seconds <= 0:
            raise InvalidInputError("episode length and step size must be positive")
        if (self.episode_length_min * 60) % self.step_seconds:
            raise InvalidInputError("episode length must be a whole number of steps")
        if not self.lam > 0.0:
            raise InvalidInputError("lambda must be positive")
        if self.power_cap < 1:
            raise InvalidInputError("power_cap must be >= 1")

    @property
    def steps(self) -> int:
        return self.episode_length_min * 60 // self.step_seconds


@dataclass
class ActivityModel:
    """Activity dynamics: a row-stochastic transition matrix or a fixed trace.

    With neither given, every activity stays put with ``stay_prob`` and
    otherwise jumps uniformly to one of the others.
    """

    num_activities: int = NUM_ACTIVITIES
    stay_prob: float = 0.9
    transitions: Optional[Sequence[Sequence[float]]] = None
    trace: Optional[Sequence[int]] = None
    _cumulative: List[List[float]] = field(init=False, repr=False, default_factory=list)

    def __post_init__(self):
        k = self.num_activities
        if k < 2:
            raise InvalidInputError("need at least 2 activities")
        if self.trace is not None:
            if any(not (0 <= int(x) < k) for x in self.trace):
                raise InvalidInputError("trace label out of range")
            self.trace = [int(x) for x in self.trace]
        if self.transitions is None:
            if not (0.0 <= self.stay_prob <= 1.0):
                raise InvalidInputError("stay_prob must be in [0, 1]")
            move = (1.0 - self.stay_prob) / (k - 1)
            self.transitions = [
                [self.stay_prob if i == j else move for j in range(k)] for i in range(k)
            ]
        if len(self.transitions) != k or any(len(row) != k for row in self.transitions):
            raise InvalidInputError(f"transition matrix must be {k}x{k}")
        for i, row in enumerate(self.transitions):
            if any(p < 0.0 for p in row) or abs(sum(row) - 1.0) > 1e-9:
                raise InvalidInputError(f"transition row {i} is not a distribution")
        self._cumulative = []
        for row in self.transitions:
            acc, cum = 0.0, []
            for p in row:
                acc += p
                cum.append(acc)
            cum[-1] = 1.0
            self._cumulative.append(cum)

    def check_trace_length(self, steps: int) -> None:
        if self.trace is not None and len(self.trace) < steps:
            raise InvalidInputError(
                f"trace has {len(self.trace)} labels but an episode needs {steps}"
            )

    def initial(self, rng: random.Random) -> int:
        return rng.randrange(self.num_activities)

    def next(self, label: int, rng: random.Random) -> int:
        return bisect.bisect_right(self._cumulative[label], rng.random())


def load_trace(path) -> List[int]:
    """Read a label trace: one integer label per line, blank lines ignored."""
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise InvalidInputError(f"{path}:{lineno}: not an integer label: {line!r}") from None
    return labels


@dataclass(frozen=True)
class SimClassifier:
    accuracy: Tuple[float, ...]

    def __post_init__(self):
        if any(not (0.0 <= a <= 1.0) for a in self.accuracy):
            raise InvalidInputError("classifier accuracies must be in [0, 1]")

    @property
    def num_activities(self) -> int:
        return len(self.accuracy)

    def classify(self, label: int, rng: random.Random) -> int:
        """Always consumes two draws so streams stay aligned across policies."""
        hit = rng.random() < self.accuracy[label]
        other = rng.randrange(len(self.accuracy) - 1)
        if hit:
            return label
        return other if other < label else other + 1


def default_accuracies(
    num_activities: int = NUM_ACTIVITIES,
    hard: Sequence[int] = DEFAULT_HARD_ACTIVITIES,
    easy_low: float = 0.9,
    easy_high: float = 0.95,
    hard_low: float = 0.3,
    hard_high: float = 0.9,
) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    hard = set(hard)
    low = tuple(hard_low if i in hard else easy_low for i in range(num_activities))
    high = tuple(hard_high if i in hard else easy_high for i in range(num_activities))
    return low, high


def episode_reward(error_rate: float, power_mC: float, pm: PowerModel, lam: float = 1.0) -> float:
    """-lambda * p_e - (P / P_tgt) ** 2."""
    if not (math.isfinite(error_rate) and math.isfinite(power_mC) and math.isfinite(lam)):
        raise InvalidInputError("reward inputs must be finite")
    if not (0.0 <= error_rate <= 1.0):
        raise InvalidInputError(f"error rate must be in [0, 1], got {error_rate}")
    if power_mC < 0.0:
        raise InvalidInputError("power must be non-negative")
    return -lam * error_rate - (power_mC / pm.p_tgt) ** 2


class StepRecord(NamedTuple):
    true_label: int
    c_low: int
    c_high: Optional[int]
    power_delta: float

    @property
    def classification(self) -> int:
        return self.c_high if self.c_high is not None else self.c_low


def error_rate(records: Sequence[StepRecord]) -> float:
    if not records:
        raise InvalidInputError("error rate of an empty episode is undefined")
    wrong = sum(1 for r in records if r.classification != r.true_label)
    return wrong / len(records)


class WearableEnv:
    """One episode at a time; call :meth:`reset` before each episode.

    The state shown before step ``k`` carries the low-set label produced at
    step ``k - 1`` (or by a warm-up classification at reset).
    """

    def __init__(
        self,
        activities: ActivityModel,
        low: SimClassifier,
        high: SimClassifier,
        power: PowerModel,
        episode: EpisodeConfig,
        activity_rng: random.Random,
        classifier_rng: random.Random,
    ):
        k = activities.num_activities
        if low.num_activities != k or high.num_activities != k:
            raise InvalidInputError("classifier label spaces must match the activity model")
        if any(h < l for l, h in zip(low.accuracy, high.accuracy)):
            raise InvalidInputError("high-set accuracy must be >= low-set accuracy per activity")
        activities.check_trace_length(episode.steps)
        self.activities = activities
        self.low = low
        self.high = high
        self.power_model = power
        self.episode = episode
        self._activity_rng = activity_rng
        self._classifier_rng = classifier_rng
        self._trace_offset = 0
        self._label = 0
        self._step = 0
        self._power = 0.0
        self._n_high = 0
        self._wrong = 0
        self._steps_per_min = 60.0 / episode.step_seconds
        self.records: List[StepRecord] = []
        self.done = True

    @property
    def power(self) -> float:
        return self._power

    @property
    def steps_taken(self) -> int:
        return self._step

    @property
    def true_label(self) -> int:
        return self._label

    def _activity_at(self, k: int) -> int:
        if self.activities.trace is not None:
            return self.activities.trace[self._trace_offset + k]
        if k == 0:
            return self.activities.initial(self._activity_rng)
        return self.activities.next(self._label, self._activity_rng)

    def _state(self, c_low: int) -> State:
        return State(
            round_half_up(self._step / self._steps_per_min),
            min(self.episode.power_cap, round_half_up(self._power)),
            c_low,
        )

    def reset(self) -> State:
        if self.activities.trace is not None and self.records:
            self._trace_offset += self.episode.steps
            if self._trace_offset + self.episode.steps > len(self.activities.trace):
                self._trace_offset = 0
        self._step = 0
        self._power = 0.0
        self._n_high = 0
        self._wrong = 0
        self.records = []
        self.done = False
        self._label = self._activity_at(0)
        c_low = self.low.classify(self._label, self._classifier_rng)
        self._state_now = self._state(c_low)
        return self._state_now

    def step(self, action: Action) -> Tuple[State, StepRecord]:
        if self.done:
            raise EpisodeStateError("episode has terminated; call reset()")
        if self._step > 0:
            self._label = self._activity_at(self._step)
        label = self._label
        rng = self._classifier_rng
        c_low = self.low.classify(label, rng)
        c_high = self.high.classify(label, rng)
        if action == Action.HIGH:
            delta = self.power_model.cost_high
            self._n_high += 1
        else:
            delta = self.power_model.cost_low
            c_high = None
        record = StepRecord(label, c_low, c_high, delta)
        self.records.append(record)
        if record.classification != label:
            self._wrong += 1
        self._step += 1
        # products of counts rather than a running sum, so totals are exact multiples
        pm = self.power_model
        self._power = (self._step - self._n_high) * pm.cost_low + self._n_high * pm.cost_high
        if self._step >= self.episode.steps:
            self.done = True
        self._state_now = self._state(c_low)
        return self._state_now, record

    @property
    def state(self) -> State:
        return self._state_now

    def error_rate(self) -> float:
        if not self.records:
            raise InvalidInputError("no steps taken")
        return self._wrong / len(self.records)

    def reward(self) -> float:
        """Zero until the episode ends, then the terminal trade-off reward."""
        if not self.done or not self.records:
            return 0.0
        return episode_reward(
            self.error_rate(), self._power, self.power_model, self.episode.lam
        )


def make_env(
    activities: ActivityModel,
    low_accuracy: Sequence[float],
    high_accuracy: Sequence[float],
    power: PowerModel,
    episode: EpisodeConfig,
    activity_rng: random.Random,
    classifier_rng: random.Random,
) -> WearableEnv:
    return WearableEnv(
        activities,
        SimClassifier(tuple(low_accuracy)),
        SimClassifier(tuple(high_accuracy)),
        power,
        episode,
        activity_rng,
        classifier_rng,
    )

