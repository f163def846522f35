"""Online estimation of each trainer's consistency level.

Two stages. :func:`em_consistency` fits the consistency for one state-action
pair by EM, treating "is ``a`` optimal at ``s``" as a hidden bit whose prior
is the RL policy's probability for ``a``. :func:`update_consistency` then
folds that per-pair estimate into a single running value per trainer, with a
step size scaled by how much the Q-table and the feedback ledger know about
the current state relative to their running averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Tuple

from numba import njit

from .errors import InvalidInputError, NoFeedbackError
from .rl import QTable
from .shaping import C_MAX, C_MIN, FeedbackLedger

DEFAULT_ALPHA0 = 1.0 / 16.0
EM_MAX_ITERS = 100
EM_TOL = 1e-9
# log-likelihood slack within which the plain 0.5-start EM answer is kept
_TIE_TOL = 1e-12


@dataclass
class TrainerEstimate:
    """Running consistency for one trainer plus the accuracy trackers."""

    c_avg: float = 0.5
    q_tilde: float = 0.1
    h_tilde: float = 0.1
    alpha0: float = DEFAULT_ALPHA0

    def __post_init__(self):
        if not (0.0 < self.c_avg < 1.0):
            raise InvalidInputError(f"c_avg must be in (0, 1), got {self.c_avg}")
        if not (self.q_tilde > 0.0 and self.h_tilde > 0.0):
            raise InvalidInputError("q_tilde and h_tilde must be positive")
        if not (0.0 < self.alpha0 <= 1.0):
            raise InvalidInputError(f"alpha0 must be in (0, 1], got {self.alpha0}")


def marginal_log_likelihood(c: float, p1q: float, h_plus: int, h_minus: int) -> float:
    """log sum_O p(h+, h-, O; C) with P(O=1) = p1q.

    If ``a`` is optimal the trainer's ``h+`` approvals are correct; otherwise
    its ``h-`` disapprovals are.
    """
    return _log_likelihood(float(c), float(p1q), int(h_plus), int(h_minus))


@njit(cache=True)
def _xlog(k, log_x):
    return 0.0 if k == 0 else k * log_x


@njit(cache=True)
def _log_likelihood(c, p1q, h_plus, h_minus):
    log_c = math.log(c) if c > 0.0 else -math.inf
    log_1c = math.log1p(-c) if c < 1.0 else -math.inf
    t1 = -math.inf
    t0 = -math.inf
    if p1q > 0.0:
        t1 = math.log(p1q) + _xlog(h_plus, log_c) + _xlog(h_minus, log_1c)
    if p1q < 1.0:
        t0 = math.log1p(-p1q) + _xlog(h_plus, log_1c) + _xlog(h_minus, log_c)
    m = max(t1, t0)
    if m == -math.inf:
        return m
    return m + math.log(math.exp(t1 - m) + math.exp(t0 - m))


@njit(cache=True)
def _em_run(c, p1q, h_plus, h_minus, max_iters, tol):
    n = h_plus + h_minus
    delta = h_plus - h_minus
    prior_logit = 0.0
    if 0.0 < p1q < 1.0:
        prior_logit = math.log(p1q) - math.log1p(-p1q)
    for _ in range(max_iters):
        # E-step: posterior that the action is optimal
        if p1q >= 1.0:
            p1 = 1.0
        elif p1q <= 0.0:
            p1 = 0.0
        else:
            x = prior_logit + delta * (math.log(c) - math.log1p(-c))
            if x >= 0.0:
                p1 = 1.0 / (1.0 + math.exp(-x))
            else:
                z = math.exp(x)
                p1 = z / (1.0 + z)
        # M-step
        c_next = (p1 * h_plus + (1.0 - p1) * h_minus) / n
        if c_next < C_MIN:
            c_next = C_MIN
        elif c_next > C_MAX:
            c_next = C_MAX
        if abs(c_next - c) < tol:
            return c_next
        c = c_next
    return c


@njit(cache=True)
def _em_best(p1q, h_plus, h_minus, max_iters, tol):
    best = _em_run(0.5, p1q, h_plus, h_minus, max_iters, tol)
    if h_plus == h_minus:
        # likelihood is proportional to (C(1-C))**h+, maximised at exactly 0.5
        return best
    n = h_plus + h_minus
    best_ll = _log_likelihood(best, p1q, h_plus, h_minus)
    from_half = True
    for start in (h_plus / n, h_minus / n):
        start = min(C_MAX, max(C_MIN, start))
        c = _em_run(start, p1q, h_plus, h_minus, max_iters, tol)
        ll = _log_likelihood(c, p1q, h_plus, h_minus)
        if ll > best_ll + _TIE_TOL:
            best = c
            best_ll = ll
            from_half = False
        elif ll >= best_ll - _TIE_TOL and not from_half and c > best:
            best = c
    return best


def em_step(c: float, p1q: float, h_plus: int, h_minus: int) -> float:
    """One E-step plus M-step of the consistency EM, starting from ``c``."""
    if h_plus + h_minus == 0:
        raise NoFeedbackError("no feedback recorded for this state-action pair")
    c = min(C_MAX, max(C_MIN, float(c)))
    # tol 0 forces exactly one update
    return _em_run(c, float(p1q), int(h_plus), int(h_minus), 1, 0.0)


def em_consistency(
    p1q: float,
    h_plus: int,
    h_minus: int,
    max_iters: int = EM_MAX_ITERS,
    tol: float = EM_TOL,
) -> float:
    """Maximum-likelihood consistency for one state-action pair.

    The EM iteration starts from 0.5. That start is a fixed point whenever
    ``p1q == 0.5``, and can sit on a likelihood minimum, so EM is also run
    from the two per-hypothesis modes ``h+/n`` and ``h-/n`` and the best
    likelihood wins. The 0.5-start answer is kept on ties; remaining ties
    prefer the larger consistency.
    """
    if h_plus < 0 or h_minus < 0:
        raise InvalidInputError("feedback counts must be non-negative")
    if h_plus + h_minus == 0:
        raise NoFeedbackError("no feedback recorded for this state-action pair")
    if not (0.0 <= p1q <= 1.0):
        raise InvalidInputError(f"p1q must be in [0, 1], got {p1q}")
    if max_iters < 1 or not tol > 0.0:
        raise InvalidInputError("max_iters must be >= 1 and tol > 0")
    return _em_best(float(p1q), int(h_plus), int(h_minus), int(max_iters), float(tol))


def accuracy_metrics(
    table: QTable, ledger: FeedbackLedger, n: int, s: Hashable
) -> Tuple[float, int]:
    """(sum_a |Q(s, a)|, total feedback from trainer ``n`` at ``s``)."""
    q_low, q_high = table.row(s)
    return abs(q_low) + abs(q_high), ledger.state_total(n, s)


def update_consistency(
    est: TrainerEstimate, c_sa: float, q_score: float, h_score: float
) -> TrainerEstimate:
    """Fold a per-pair estimate into the trainer's running consistency.

    Step size is ``min(1, alpha0 * q * h / (Q~ * H~))``, computed from the old
    trackers; ``C`` moves first, then ``Q~`` and ``H~``.
    """
    if not (0.0 <= c_sa <= 1.0):
        raise InvalidInputError(f"c_sa must be in [0, 1], got {c_sa}")
    if q_score < 0.0 or h_score < 0.0:
        raise InvalidInputError("accuracy scores must be non-negative")
    weight = q_score * h_score
    if weight == 0.0:
        return est
    alpha = min(1.0, est.alpha0 * weight / (est.q_tilde * est.h_tilde))
    c = est.c_avg + alpha * (c_sa - est.c_avg)
    est.c_avg = C_MIN if c < C_MIN else (C_MAX if c > C_MAX else c)
    est.q_tilde += alpha * (q_score - est.q_tilde)
    est.h_tilde += alpha * (h_score - est.h_tilde)
    return est

