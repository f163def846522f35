"""Tabular Q-learning with Boltzmann exploration over the wearable MDP."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Hashable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

from .errors import InvalidInputError

Policy = Tuple[float, float]


class Action(IntEnum):
    """Which feature set the wearable computes this step."""

    LOW = 0
    HIGH = 1


ACTIONS = (Action.LOW, Action.HIGH)


class State(NamedTuple):
    """Discrete agent state: rounded minutes, rounded cumulative mC, last low-set label."""

    elapsed_min: int
    power_bucket: int
    low_class: int


@dataclass(frozen=True)
class RlHyperParams:
    gamma: float = 0.99
    alpha_q: float = 0.1
    tau: float = 0.1
    # None lets the experiment harness pick a pessimistic value
    q_init: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise InvalidInputError(f"gamma must be in (0, 1], got {self.gamma}")
        if not (0.0 < self.alpha_q <= 1.0):
            raise InvalidInputError(f"alpha_q must be in (0, 1], got {self.alpha_q}")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise InvalidInputError(f"tau must be a finite positive number, got {self.tau}")
        if self.q_init is not None and not math.isfinite(self.q_init):
            raise InvalidInputError("q_init must be finite")


class QTable:
    """Sparse state-action values; unseen pairs read as ``initial`` (0 by default)."""

    def __init__(self, initial: float = 0.0):
        if not math.isfinite(initial):
            raise InvalidInputError("initial Q value must be finite")
        self.initial = initial
        self._default = (initial, initial)
        self._values: Dict[Hashable, List[float]] = {}

    def get(self, s: Hashable, a: Action) -> float:
        row = self._values.get(s)
        return self.initial if row is None else row[a]

    def row(self, s: Hashable) -> Tuple[float, float]:
        row = self._values.get(s)
        return self._default if row is None else (row[0], row[1])

    def set(self, s: Hashable, a: Action, value: float) -> None:
        if not math.isfinite(value):
            raise InvalidInputError(f"Q value must be finite, got {value}")
        row = self._values.get(s)
        if row is None:
            row = self._values[s] = [self.initial, self.initial]
        row[a] = value

    def greedy(self, s: Hashable) -> Action:
        q_low, q_high = self.row(s)
        # ties go to the lowest action index
        return Action.HIGH if q_high > q_low else Action.LOW

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self._values)

    def copy(self) -> "QTable":
        out = QTable(self.initial)
        out._values = {s: list(row) for s, row in self._values.items()}
        return out


def q_update(
    table: QTable,
    s: Hashable,
    a: Action,
    r: float,
    s_next: Hashable,
    terminal: bool,
    hp: RlHyperParams,
) -> QTable:
    """One Watkins Q-learning backup at ``(s, a)``. Mutates and returns ``table``."""
    if not math.isfinite(r):
        raise InvalidInputError(f"reward must be finite, got {r}")
    if terminal:
        target = r
    else:
        target = r + hp.gamma * max(table.row(s_next))
    q_sa = table.get(s, a)
    table.set(s, a, q_sa + hp.alpha_q * (target - q_sa))
    return table


def softmax(values: Sequence[float], tau: float) -> Tuple[float, ...]:
    if not tau > 0.0:
        raise InvalidInputError(f"temperature must be > 0, got {tau}")
    m = max(values)
    weights = [math.exp((v - m) / tau) for v in values]
    total = sum(weights)
    return tuple(w / total for w in weights)


def boltzmann_policy(table: QTable, s: Hashable, tau: float) -> Policy:
    """pi_R(s, .) proportional to exp(Q(s, .) / tau)."""
    return softmax(table.row(s), tau)


def _check_distribution(policy: Sequence[float], what: str = "policy") -> None:
    if len(policy) != len(ACTIONS):
        raise InvalidInputError(f"{what} must have {len(ACTIONS)} entries, got {len(policy)}")
    total = 0.0
    for p in policy:
        if not (p >= 0.0 and math.isfinite(p)):
            raise InvalidInputError(f"{what} has invalid probability {p}")
        total += p
    if abs(total - 1.0) > 1e-9:
        raise InvalidInputError(f"{what} sums to {total}, not 1")


def select_action(policy: Sequence[float], rng: random.Random) -> Action:
    """Sample an action. Consumes exactly one uniform draw from ``rng``."""
    _check_distribution(policy)
    u = rng.random()
    return Action.LOW if u < policy[0] else Action.HIGH
