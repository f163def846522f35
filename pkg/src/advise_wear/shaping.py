"""Feedback bookkeeping and the feedback policy pi_F.

Each trainer's accumulated feedback at ``(s, a)`` is summarised by
``delta = h_plus - h_minus``. A trainer with consistency ``C`` says that
``a`` is optimal with odds ``(C / (1 - C)) ** delta``; independent trainers
multiply their odds. All of this is done on the log-odds scale so that large
``|delta|`` cannot overflow.
"""

from __future__ import annotations

import math
from typing import Dict, Hashable, List, Sequence, Tuple

from .errors import InvalidInputError
from .rl import ACTIONS, Action, Policy, _check_distribution

C_MIN = 1e-6
C_MAX = 1.0 - 1e-6


def clamp_consistency(c: float) -> float:
    if math.isnan(c):
        raise InvalidInputError("consistency is NaN")
    return min(C_MAX, max(C_MIN, c))


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def _logit(c: float) -> float:
    return math.log(c) - math.log1p(-c)


class FeedbackLedger:
    """Per-trainer positive/negative feedback counts per state-action pair."""

    def __init__(self, num_trainers: int):
        if num_trainers < 0:
            raise InvalidInputError(f"num_trainers must be >= 0, got {num_trainers}")
        # row layout: [h+ low, h- low, h+ high, h- high]
        self._counts: List[Dict[Hashable, List[int]]] = [{} for _ in range(num_trainers)]

    @property
    def num_trainers(self) -> int:
        return len(self._counts)

    def _check_trainer(self, n: int) -> None:
        if not (0 <= n < len(self._counts)):
            raise InvalidInputError(f"trainer index {n} out of range [0, {len(self._counts)})")

    def record(self, n: int, s: Hashable, a: Action, positive: bool) -> None:
        self._check_trainer(n)
        row = self._counts[n].get(s)
        if row is None:
            row = self._counts[n][s] = [0, 0, 0, 0]
        row[2 * int(a) + (0 if positive else 1)] += 1

    def counts(self, n: int, s: Hashable, a: Action) -> Tuple[int, int]:
        self._check_trainer(n)
        row = self._counts[n].get(s)
        if row is None:
            return 0, 0
        i = 2 * int(a)
        return row[i], row[i + 1]

    def delta(self, n: int, s: Hashable, a: Action) -> int:
        h_plus, h_minus = self.counts(n, s, a)
        return h_plus - h_minus

    def state_total(self, n: int, s: Hashable) -> int:
        self._check_trainer(n)
        row = self._counts[n].get(s)
        return 0 if row is None else sum(row)

    def states(self, n: int):
        self._check_trainer(n)
        return self._counts[n].keys()


def record_feedback(
    ledger: FeedbackLedger, n: int, s: Hashable, a: Action, positive: bool
) -> FeedbackLedger:
    ledger.record(n, s, a, positive)
    return ledger


def single_trainer_policy(delta: int, c: float) -> float:
    """C**d / (C**d + (1 - C)**d), evaluated as a sigmoid of ``d * logit(C)``."""
    c = clamp_consistency(c)
    return _sigmoid(delta * _logit(c))


def multi_trainer_policy(
    ledger: FeedbackLedger, estimates: Sequence[float], s: Hashable
) -> Policy:
    """Per-action probability that the action is optimal given all trainers.

    The entries are not normalised across actions; :func:`fuse_policies`
    does that. With no trainers every action gets exactly 0.5.
    """
    if len(estimates) != ledger.num_trainers:
        raise InvalidInputError(
            f"got {len(estimates)} consistency estimates for {ledger.num_trainers} trainers"
        )
    logits = [_logit(clamp_consistency(c)) for c in estimates]
    out = []
    for a in ACTIONS:
        x = 0.0
        for n, lc in enumerate(logits):
            d = ledger.delta(n, s, a)
            if d:
                x += d * lc
        out.append(_sigmoid(x))
    return out[0], out[1]


def fuse_policies(pi_r: Sequence[float], pi_f: Sequence[float]) -> Policy:
    """Normalised elementwise product of the RL policy and the feedback policy.

    ``pi_f`` may be unnormalised weights. A uniform ``pi_f`` returns ``pi_r``
    untouched, and an all-zero product falls back to ``pi_r``.
    """
    _check_distribution(pi_r, "pi_r")
    if len(pi_f) != len(ACTIONS):
        raise InvalidInputError(f"pi_f must have {len(ACTIONS)} entries, got {len(pi_f)}")
    for w in pi_f:
        if not (w >= 0.0 and math.isfinite(w)):
            raise InvalidInputError(f"pi_f has invalid weight {w}")
    if pi_f[0] == pi_f[1] and pi_f[0] > 0.0:
        return pi_r[0], pi_r[1]
    w0 = pi_r[0] * pi_f[0]
    w1 = pi_r[1] * pi_f[1]
    total = w0 + w1
    if total <= 1e-300:
        return pi_r[0], pi_r[1]
    return w0 / total, w1 / total
