"""Experiment runner: the four comparison arms over multiple seeds."""

from __future__ import annotations

import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from .consistency import (
    EM_MAX_ITERS,
    EM_TOL,
    TrainerEstimate,
    accuracy_metrics,
    em_consistency,
    update_consistency,
)
from .environment import (
    DEFAULT_HARD_ACTIVITIES,
    NUM_ACTIVITIES,
    ActivityModel,
    EpisodeConfig,
    PowerModel,
    WearableEnv,
    default_accuracies,
    make_env,
)
from .errors import ConfigError, InvalidInputError
from .rl import Action, QTable, RlHyperParams, boltzmann_policy, q_update, select_action
from .shaping import FeedbackLedger, fuse_policies, multi_trainer_policy
from .trainers import TrainerModel, default_trainers, generate_feedback, trainer_classify

log = logging.getLogger(__name__)

STREAMS = ("activity", "classifier", "trainer", "policy")


class Arm(str, Enum):
    MULTI_TRAINERS = "MultiTrainers"
    PLAIN_QL = "PlainQL"
    RANDOM = "RandomPolicy"
    FIXED_LOW = "FixedLow"

    @classmethod
    def parse(cls, name: str) -> "Arm":
        key = name.replace("-", "").replace("_", "").lower()
        aliases = {
            "multitrainers": cls.MULTI_TRAINERS,
            "multi": cls.MULTI_TRAINERS,
            "plainql": cls.PLAIN_QL,
            "ql": cls.PLAIN_QL,
            "randompolicy": cls.RANDOM,
            "random": cls.RANDOM,
            "fixedlow": cls.FIXED_LOW,
        }
        try:
            return aliases[key]
        except KeyError:
            raise InvalidInputError(
                f"unknown arm {name!r}; expected one of {[a.value for a in cls]}"
            ) from None


ARM_ORDER = (Arm.MULTI_TRAINERS, Arm.PLAIN_QL, Arm.RANDOM, Arm.FIXED_LOW)


@dataclass
class ActivitySpec:
    """How to build the activity model and the two simulated classifiers.

    Explicit ``low_accuracy``/``high_accuracy`` lists override the
    hard/easy defaults.
    """

    num_activities: int = NUM_ACTIVITIES
    stay_prob: float = 0.9
    hard: Tuple[int, ...] = DEFAULT_HARD_ACTIVITIES
    easy_low: float = 0.9
    easy_high: float = 0.95
    hard_low: float = 0.3
    hard_high: float = 0.9
    low_accuracy: Optional[Tuple[float, ...]] = None
    high_accuracy: Optional[Tuple[float, ...]] = None
    trace: Optional[Tuple[int, ...]] = None

    def accuracies(self) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
        low, high = default_accuracies(
            self.num_activities, self.hard,
            self.easy_low, self.easy_high, self.hard_low, self.hard_high,
        )
        return (
            tuple(self.low_accuracy) if self.low_accuracy is not None else low,
            tuple(self.high_accuracy) if self.high_accuracy is not None else high,
        )

    def model(self) -> ActivityModel:
        return ActivityModel(
            num_activities=self.num_activities,
            stay_prob=self.stay_prob,
            trace=list(self.trace) if self.trace is not None else None,
        )


@dataclass
class ExperimentConfig:
    arm: Arm = Arm.MULTI_TRAINERS
    episodes: int = 2000
    seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)
    rl: RlHyperParams = field(default_factory=RlHyperParams)
    power: PowerModel = field(default_factory=PowerModel)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    activities: ActivitySpec = field(default_factory=ActivitySpec)
    trainers: List[TrainerModel] = field(default_factory=default_trainers)
    alpha0: float = 1.0 / 16.0
    em_max_iters: int = EM_MAX_ITERS
    em_tol: float = EM_TOL
    smoothing_window: int = 100
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        """Check cross-field constraints; raise :class:`ConfigError` with a field path."""
        if self.episodes < 1:
            raise ConfigError("experiment.episodes", "must be >= 1")
        if not self.seeds:
            raise ConfigError("experiment.seeds", "need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("experiment.seeds", "seeds must be distinct")
        if self.smoothing_window < 1:
            raise ConfigError("experiment.smoothing_window", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("experiment.workers", "must be >= 1")
        if not (0.0 < self.alpha0 <= 1.0):
            raise ConfigError("consistency.alpha0", "must be in (0, 1]")
        if self.em_max_iters < 1:
            raise ConfigError("consistency.em_max_iters", "must be >= 1")
        if not self.em_tol > 0.0:
            raise ConfigError("consistency.em_tol", "must be > 0")
        act = self.activities
        if act.num_activities < 2:
            raise ConfigError("activities.count", "need at least 2 activities")
        if any(not (0 <= h < act.num_activities) for h in act.hard):
            raise ConfigError("activities.hard", "activity index out of range")
        low, high = act.accuracies()
        for name, acc in (("low_accuracy", low), ("high_accuracy", high)):
            if len(acc) != act.num_activities:
                raise ConfigError(f"activities.{name}", f"need {act.num_activities} values")
            if any(not (0.0 <= a <= 1.0) for a in acc):
                raise ConfigError(f"activities.{name}", "accuracies must be in [0, 1]")
        if any(h < l for l, h in zip(low, high)):
            raise ConfigError(
                "activities.high_accuracy", "must be >= low-set accuracy for every activity"
            )
        if act.trace is not None:
            if len(act.trace) < self.episode.steps:
                raise ConfigError(
                    "activities.trace",
                    f"trace has {len(act.trace)} labels, an episode needs {self.episode.steps}",
                )
            if any(not (0 <= x < act.num_activities) for x in act.trace):
                raise ConfigError("activities.trace", "label out of range")
        names = [t.name for t in self.trainers]
        if len(set(names)) != len(names):
            raise ConfigError("trainers", "trainer names must be unique")
        return self


@dataclass(frozen=True)
class EpisodeMetrics:
    """One learning-curve row."""

    arm: str
    seed: int
    episode: int
    reward: float
    error_rate: float
    power_mC: float
    consistency: Optional[Tuple[float, ...]] = None


def worst_episode_reward(cfg: ExperimentConfig) -> float:
    """Lowest terminal reward any policy can get: every step wrong, every step high."""
    p_max = cfg.episode.steps * cfg.power.cost_high
    return -cfg.episode.lam - (p_max / cfg.power.p_tgt) ** 2


def initial_q_value(cfg: ExperimentConfig) -> float:
    """``rl.q_init`` if set, else the worst achievable return.

    Every reward is <= 0, so a zero start makes untried actions look best to
    the Boltzmann policy; starting at the floor makes tried actions rise
    above untried ones instead.
    """
    if cfg.rl.q_init is not None:
        return cfg.rl.q_init
    return worst_episode_reward(cfg)


def rng_streams(seed: int) -> dict:
    """Independent named random streams derived from one master seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {
        name: random.Random(int.from_bytes(child.generate_state(4).tobytes(), "little"))
        for name, child in zip(STREAMS, children)
    }


def build_env(cfg: ExperimentConfig, streams: dict) -> WearableEnv:
    low, high = cfg.activities.accuracies()
    return make_env(
        cfg.activities.model(), low, high, cfg.power, cfg.episode,
        streams["activity"], streams["classifier"],
    )


class MultiTrainerAgent:
    """Q-learning whose action distribution is reshaped by trainer feedback.

    With ``shaping=False`` this is plain Q-learning: no trainers are consulted
    and no random numbers are drawn from the trainer stream.
    """

    def __init__(
        self,
        cfg: ExperimentConfig,
        trainer_rng: random.Random,
        policy_rng: random.Random,
        shaping: bool = True,
    ):
        self.hp = cfg.rl
        self.q = QTable(initial_q_value(cfg))
        self.shaping = shaping
        self.trainers = list(cfg.trainers) if shaping else []
        self.ledger = FeedbackLedger(len(self.trainers))
        self.estimates = [TrainerEstimate(alpha0=cfg.alpha0) for _ in self.trainers]
        self.num_activities = cfg.activities.num_activities
        self.p_tgt = cfg.power.p_tgt
        self.em_max_iters = cfg.em_max_iters
        self.em_tol = cfg.em_tol
        self._trainer_rng = trainer_rng
        self._policy_rng = policy_rng

    def act(self, s) -> Tuple[Action, Tuple[float, float]]:
        pi_r = boltzmann_policy(self.q, s, self.hp.tau)
        pi = pi_r
        if self.trainers:
            pi_f = multi_trainer_policy(self.ledger, [e.c_avg for e in self.estimates], s)
            pi = fuse_policies(pi_r, pi_f)
        return select_action(pi, self._policy_rng), pi_r

    def observe_feedback(self, s, a: Action, pi_r, record, power_so_far: float) -> None:
        rng = self._trainer_rng
        ledger = self.ledger
        for n, tm in enumerate(self.trainers):
            c_trainer = trainer_classify(tm, record.true_label, rng, self.num_activities)
            if rng.random() >= tm.feedback_prob:
                continue
            for fb_action, positive in generate_feedback(
                c_trainer, record.c_low, record.c_high, power_so_far, self.p_tgt
            ):
                ledger.record(n, s, fb_action, positive)
        p1q = pi_r[a]
        for n, est in enumerate(self.estimates):
            h_plus, h_minus = ledger.counts(n, s, a)
            if h_plus + h_minus == 0:
                continue
            c_sa = em_consistency(p1q, h_plus, h_minus, self.em_max_iters, self.em_tol)
            q_score, h_score = accuracy_metrics(self.q, ledger, n, s)
            update_consistency(est, c_sa, q_score, h_score)

    def learn(self, s, a: Action, r: float, s_next, terminal: bool) -> None:
        q_update(self.q, s, a, r, s_next, terminal, self.hp)

    def consistency(self) -> Tuple[float, ...]:
        return tuple(e.c_avg for e in self.estimates)


def run_seed(
    cfg: ExperimentConfig,
    arm: Arm,
    seed: int,
    episodes: Optional[int] = None,
    visit: Optional[Callable[[object, Action], None]] = None,
) -> List[EpisodeMetrics]:
    """Run every episode of one (arm, seed) pair.

    ``visit(state, action)`` is called for every decision, which lets tests
    compare trajectories between arms.
    """
    streams = rng_streams(seed)
    env = build_env(cfg, streams)
    policy_rng = streams["policy"]
    learning = arm in (Arm.MULTI_TRAINERS, Arm.PLAIN_QL)
    agent = None
    if learning:
        agent = MultiTrainerAgent(
            cfg, streams["trainer"], policy_rng, shaping=arm == Arm.MULTI_TRAINERS
        )
    rows = []
    for episode in range(cfg.episodes if episodes is None else episodes):
        s = env.reset()
        while not env.done:
            if agent is not None:
                a, pi_r = agent.act(s)
            elif arm == Arm.RANDOM:
                a = select_action((0.5, 0.5), policy_rng)
            else:
                a = Action.LOW
            if visit is not None:
                visit(s, a)
            s_next, record = env.step(a)
            if agent is not None:
                if agent.trainers:
                    agent.observe_feedback(s, a, pi_r, record, env.power)
                agent.learn(s, a, env.reward(), s_next, env.done)
            s = s_next
        consistency = None
        if arm == Arm.MULTI_TRAINERS:
            consistency = agent.consistency()
        rows.append(
            EpisodeMetrics(
                arm.value, seed, episode, env.reward(), env.error_rate(), env.power, consistency
            )
        )
    log.debug("finished arm=%s seed=%d", arm.value, seed)
    return rows


def _run_task(args) -> List[EpisodeMetrics]:
    cfg, arm, seed = args
    return run_seed(cfg, arm, seed)


def run_experiment(
    cfg: ExperimentConfig, arms: Optional[Iterable[Arm]] = None
) -> Iterator[EpisodeMetrics]:
    """Yield metrics rows ordered by (arm, seed, episode).

    ``arms`` defaults to ``cfg.arm``. With ``cfg.workers > 1`` the
    (arm, seed) runs execute in separate processes; output order does not
    depend on completion order.
    """
    cfg.validate()
    arm_list = [cfg.arm] if arms is None else [Arm(a) for a in arms]
    tasks = [(cfg, arm, seed) for arm in arm_list for seed in cfg.seeds]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for rows in pool.map(_run_task, tasks):
                yield from rows
    else:
        for task in tasks:
            yield from _run_task(task)


def trajectory(
    cfg: ExperimentConfig, arm: Arm, seed: int, episodes: int
) -> List[Tuple[object, Action]]:
    """(state, action) pairs visited by an arm, for reproducibility checks."""
    visited: List[Tuple[object, Action]] = []
    run_seed(cfg, arm, seed, episodes, visit=lambda s, a: visited.append((s, a)))
    return visited
