import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from advise_wear.consistency import (
    TrainerEstimate,
    accuracy_metrics,
    em_consistency,
    em_step,
    marginal_log_likelihood,
    update_consistency,
)
from advise_wear.errors import InvalidInputError, NoFeedbackError
from advise_wear.rl import Action, QTable, State
from advise_wear.shaping import C_MAX, C_MIN, FeedbackLedger

from oracles import likelihood_at, marginal_likelihood_grid

S = State(0, 0, 0)


def test_estimate_defaults():
    e = TrainerEstimate()
    assert (e.c_avg, e.q_tilde, e.h_tilde, e.alpha0) == (0.5, 0.1, 0.1, 1 / 16)


def test_em_symmetric_start_is_fixed_point():
    assert em_consistency(0.5, 1, 0) == 0.5


def test_em_rises_to_upper_clamp():
    assert em_consistency(0.9, 10, 0) == pytest.approx(C_MAX, abs=1e-12)


def test_em_first_iteration_value():
    # from 0.5 the posterior equals the prior 0.9, so C = 0.9
    c = em_step(0.5, 0.9, 10, 0)
    assert c == pytest.approx(0.9, abs=1e-12)
    for _ in range(5):
        c_next = em_step(c, 0.9, 10, 0)
        assert c_next >= c
        c = c_next
    assert c == C_MAX


@pytest.mark.parametrize("k", [1, 2, 5, 10])
@pytest.mark.parametrize("p", [0.1, 0.5, 0.7])
def test_em_balanced_feedback_matches_grid(k, p):
    c = em_consistency(p, k, k)
    grid, lik = marginal_likelihood_grid(p, k, k)
    assert abs(c - grid[np.argmax(lik)]) <= 1e-3


def test_em_errors():
    with pytest.raises(NoFeedbackError):
        em_consistency(0.5, 0, 0)
    with pytest.raises(InvalidInputError):
        em_consistency(1.5, 1, 0)
    with pytest.raises(InvalidInputError):
        em_consistency(0.5, -1, 2)


def test_log_likelihood_matches_direct_formula():
    for c, p, hp, hm in [(0.3, 0.2, 3, 1), (0.9, 0.7, 0, 4), (0.5, 0.5, 6, 6)]:
        assert math.exp(marginal_log_likelihood(c, p, hp, hm)) == pytest.approx(
            likelihood_at(c, p, hp, hm), rel=1e-12
        )


def test_accuracy_metrics_examples():
    t, led = QTable(), FeedbackLedger(1)
    assert accuracy_metrics(t, led, 0, S) == (0.0, 0)
    t.set(S, Action.LOW, -2.0)
    t.set(S, Action.HIGH, 3.0)
    led.record(0, S, Action.LOW, True)
    led.record(0, S, Action.LOW, True)
    led.record(0, S, Action.HIGH, False)
    assert accuracy_metrics(t, led, 0, S) == (5.0, 3)


def test_update_examples():
    e = TrainerEstimate(c_avg=0.7)
    update_consistency(e, 0.7, 3.0, 4.0)
    assert e.c_avg == 0.7
    e = TrainerEstimate()
    update_consistency(e, 0.9, 0.1, 0.1)
    assert e.c_avg == pytest.approx(0.525, abs=1e-15)
    e = TrainerEstimate()
    update_consistency(e, 0.9, 32 * 0.1, 0.1)
    assert e.c_avg == 0.9
    assert (e.q_tilde, e.h_tilde) == (3.2, 0.1)


def test_update_zero_weight_is_noop():
    e = TrainerEstimate(c_avg=0.3, q_tilde=0.4, h_tilde=2.0)
    update_consistency(e, 0.99, 0.0, 5.0)
    assert (e.c_avg, e.q_tilde, e.h_tilde) == (0.3, 0.4, 2.0)


@pytest.mark.invariant
@given(st.integers(0, 40), st.integers(0, 40), st.floats(0.0, 1.0))
def test_em_relabel_symmetry(hp, hm, p):
    if hp + hm == 0:
        return
    a = em_consistency(p, hp, hm)
    b = em_consistency(1.0 - p, hm, hp)
    assert abs(a - b) <= 1e-6
    assert C_MIN <= a <= C_MAX


@pytest.mark.invariant
@given(st.integers(0, 20), st.integers(0, 20), st.sampled_from([0.05, 0.2, 0.45, 0.6, 0.95]))
def test_em_attains_grid_max(hp, hm, p):
    if hp + hm == 0:
        return
    c = em_consistency(p, hp, hm)
    _, lik = marginal_likelihood_grid(p, hp, hm)
    assert likelihood_at(c, p, hp, hm) >= lik.max() - 1e-3


@pytest.mark.invariant
@given(
    st.lists(
        st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1e4), st.floats(0.0, 1e4)), max_size=60
    )
)
def test_update_stays_in_bounds(updates):
    e = TrainerEstimate()
    for c_sa, q, h in updates:
        update_consistency(e, c_sa, q, h)
        assert C_MIN <= e.c_avg <= C_MAX
        assert e.q_tilde > 0.0 and e.h_tilde > 0.0


def planted_recovery(c_star: float, seed: int, updates: int = 1000, states: int = 10) -> float:
    """A trainer right with probability ``c_star`` on a bandit whose optima are known.

    The RL policy is taken as converged: it plays each state's optimal arm
    with probability 1 - 1e-4.
    """
    rng = random.Random(seed)
    optimal = [rng.choice(list(Action)) for _ in range(states)]
    q = QTable()
    for s, a in enumerate(optimal):
        q.set(s, a, 1.0)
    ledger = FeedbackLedger(1)
    est = TrainerEstimate()
    p_opt = 1.0 - 1e-4
    for _ in range(updates):
        s = rng.randrange(states)
        a = optimal[s] if rng.random() < p_opt else Action(1 - optimal[s])
        right = rng.random() < c_star
        # correct feedback approves the optimal arm and disapproves the other
        ledger.record(0, s, a, right == (a == optimal[s]))
        pi_r_a = p_opt if a == optimal[s] else 1.0 - p_opt
        hp, hm = ledger.counts(0, s, a)
        c_sa = em_consistency(pi_r_a, hp, hm)
        update_consistency(est, c_sa, *accuracy_metrics(q, ledger, 0, s))
    return est.c_avg


@pytest.mark.parametrize("c_star", [0.6, 0.8, 0.95])
def test_planted_consistency_recovered(c_star):
    hits = sum(abs(planted_recovery(c_star, seed) - c_star) <= 0.05 for seed in range(5))
    assert hits >= 4


def test_planted_consistency_uninformative_trainer():
    for seed in range(5):
        assert 0.4 <= planted_recovery(0.5, seed) <= 0.6
