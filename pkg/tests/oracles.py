"""Reference computations written independently of the package under test."""

from __future__ import annotations

import math
from typing import Dict, Sequence, Tuple

import numpy as np


def marginal_likelihood_grid(p1q: float, h_plus: int, h_minus: int, step: float = 1e-3):
    """Grid values of p*C^h+*(1-C)^h- + (1-p)*(1-C)^h+*C^h- (plain floats, no logs)."""
    grid = np.arange(1, int(round(1 / step))) * step
    lik = p1q * grid**h_plus * (1 - grid) ** h_minus + (1 - p1q) * (1 - grid) ** h_plus * grid**h_minus
    return grid, lik


def likelihood_at(c: float, p1q: float, h_plus: int, h_minus: int) -> float:
    return p1q * c**h_plus * (1 - c) ** h_minus + (1 - p1q) * (1 - c) ** h_plus * c**h_minus


def value_iteration(
    transitions: Dict[Tuple[int, int], Tuple[int, float, bool]],
    states: Sequence[int],
    actions: Sequence[int],
    gamma: float,
    tol: float = 1e-13,
) -> Dict[Tuple[int, int], float]:
    """Optimal Q for a deterministic MDP given as (s, a) -> (s', r, terminal)."""
    q = {(s, a): 0.0 for s in states for a in actions}
    while True:
        worst = 0.0
        for (s, a), (s2, r, term) in transitions.items():
            target = r if term else r + gamma * max(q[(s2, b)] for b in actions)
            worst = max(worst, abs(target - q[(s, a)]))
            q[(s, a)] = target
        if worst < tol:
            return q


def binomial_bounds(n: int, p: float, k_sigma: float = 3.0) -> Tuple[float, float]:
    """Mean +- k sigma for a sample proportion."""
    sd = math.sqrt(p * (1 - p) / n)
    return p - k_sigma * sd, p + k_sigma * sd
