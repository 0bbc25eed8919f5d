"""Closed-form study of reward-shape bias on an idealized chain task.

The task is a length-p chain: one expert action per state advances toward
completion and pays R; any other action is a non-expert move. Under a
strictly positive reward shape the non-expert move pays 0, under the
neutral shape it pays -R. Three competing behaviors have closed-form
discounted returns:

* expert: p expert steps, then done;
* loop: p-1 expert steps, then alternate back/forward forever (survives);
* terminate: p-1 expert steps, then end the episode with one non-expert
  action (only meaningful under the neutral shape, where it costs -R).

Looping beats finishing under the positive shape exactly when
gamma^2 + gamma > 1, i.e. past gamma = (sqrt 5 - 1) / 2, independent of p
and R. The same comparison is exposed as a small MDP for value iteration,
which must reproduce the algebra.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from gailbias import kernels
from gailbias.errors import ConfigurationError

CHAIN_EXPERT = kernels.CHAIN_EXPERT
CHAIN_LOOP = kernels.CHAIN_LOOP
CHAIN_TERMINATE = kernels.CHAIN_TERMINATE


@dataclass(frozen=True)
class BiasScenario:
    path_length: int          # p, number of expert steps to finish
    reward_magnitude: float   # R, reward of one expert step
    gamma: float

    def __post_init__(self):
        if self.path_length < 1:
            raise ConfigurationError("path_length must be at least 1")
        if self.reward_magnitude <= 0.0:
            raise ConfigurationError("reward_magnitude must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in [0, 1)")


def expert_return(s: BiasScenario) -> float:
    g, p, r = s.gamma, s.path_length, s.reward_magnitude
    # edge cases by direct summation, keeping the formulas division-free there
    if g == 0.0 or p == 1:
        return r
    return (1.0 - g ** p) / (1.0 - g) * r


def loop_return_positive(s: BiasScenario) -> float:
    """Survive by oscillating at the end of the chain; back-steps pay 0."""
    g, p, r = s.gamma, s.path_length, s.reward_magnitude
    if g == 0.0:
        return r if p > 1 else 0.0
    if p == 1:
        return g / (1.0 - g * g) * r
    return (1.0 - g ** (p - 1)) / (1.0 - g) * r + g ** p / (1.0 - g * g) * r


def loop_return_neutral(s: BiasScenario) -> float:
    """Same oscillation when back-steps pay -R."""
    g, p, r = s.gamma, s.path_length, s.reward_magnitude
    if g == 0.0:
        return r if p > 1 else -r
    if p == 1:
        return -r / (1.0 + g)
    return (1.0 - g ** (p - 1)) / (1.0 - g) * r - g ** (p - 1) / (1.0 + g) * r


def terminate_return_neutral(s: BiasScenario) -> float:
    """Quit one step early at cost -R when rewards can be negative."""
    g, p, r = s.gamma, s.path_length, s.reward_magnitude
    if g == 0.0 or p == 1:
        return r if p > 1 else -r
    return (1.0 - g ** (p - 1)) / (1.0 - g) * r - g ** (p - 1) * r


def survival_bias_threshold() -> float:
    """Discount above which looping beats finishing under positive rewards."""
    return (math.sqrt(5.0) - 1.0) / 2.0


def loop_advantage_positive(s: BiasScenario) -> float:
    """loop_return_positive - expert_return in a cancellation-free form.

    The heads of the two returns coincide, so the difference factors as
    gamma^(p-1) * R * (gamma^2 + gamma - 1) / (1 - gamma^2); subtracting
    the raw returns instead loses the sign to round-off for small gamma.
    """
    g, p, r = s.gamma, s.path_length, s.reward_magnitude
    return g ** (p - 1) * r * (g * g + g - 1.0) / (1.0 - g * g)


def crossover_gamma(path_length: int, reward_magnitude: float = 1.0,
                    tol: float = 1e-9) -> float:
    """Bisect for the discount where the positive-shape loop advantage
    changes sign. Analytically this is survival_bias_threshold() for every
    path length and magnitude."""
    # the advantage is exactly zero at gamma = 0 for p >= 2, so bracket from
    # just inside the interval where it is strictly negative
    lo, hi = 1e-9, 1.0 - 1e-9

    def adv(g):
        return loop_advantage_positive(
            BiasScenario(path_length, reward_magnitude, g))

    if not adv(lo) < 0.0 < adv(hi):
        raise ConfigurationError("loop advantage does not bracket a sign change")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if adv(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# brute-force oracle

_POWER_CACHE: dict[float, np.ndarray] = {}


def _powers(gamma: float, n: int) -> np.ndarray:
    cached = _POWER_CACHE.get(gamma)
    if cached is None or len(cached) < n:
        cached = gamma ** np.arange(max(n, 256), dtype=np.float64)
        _POWER_CACHE[gamma] = cached
    return cached[:n]


def brute_force_return(head, cycle, gamma: float, tol: float = 1e-12) -> float:
    """Discounted return of the sequence head + cycle + cycle + ...

    The infinite tail is truncated once the remaining mass is below tol.
    An empty cycle means the rewards simply stop after the head.
    """
    head = np.asarray(head, dtype=np.float64)
    cycle = np.asarray(cycle, dtype=np.float64)
    if not 0.0 <= gamma < 1.0:
        raise ConfigurationError("gamma must lie in [0, 1)")
    if len(cycle) == 0:
        n = len(head)
        return float(_powers(gamma, n) @ head) if n else 0.0
    if gamma == 0.0:
        seq0 = head[0] if len(head) else cycle[0]
        return float(seq0)
    max_r = max(np.abs(head).max() if len(head) else 0.0, np.abs(cycle).max())
    if max_r == 0.0:
        return float(_powers(gamma, len(head)) @ head) if len(head) else 0.0
    # gamma^T * max_r / (1 - gamma) < tol bounds the discarded tail
    horizon = int(math.ceil(math.log(tol * (1.0 - gamma) / max_r) / math.log(gamma)))
    horizon = max(horizon, len(head) + len(cycle))
    reps = -(-(horizon - len(head)) // len(cycle))
    seq = np.concatenate([head, np.tile(cycle, reps)])
    return float(_powers(gamma, len(seq)) @ seq)


# ---------------------------------------------------------------------------
# chain MDP and value iteration


@dataclass(frozen=True)
class ChainMDP:
    path_length: int
    reward_magnitude: float
    gamma: float
    early_terminate_state: Optional[int] = None

    def __post_init__(self):
        BiasScenario(self.path_length, self.reward_magnitude, self.gamma)
        if self.early_terminate_state is not None and not (
                0 <= self.early_terminate_state < self.path_length):
            raise ConfigurationError("early_terminate_state out of range")


@dataclass(frozen=True)
class ChainSolution:
    values: np.ndarray   # (p + 1,), final state pinned at 0
    policy: np.ndarray   # (p,) codes CHAIN_EXPERT / CHAIN_LOOP / CHAIN_TERMINATE
    iterations: int


def solve_chain_mdp(mdp: ChainMDP, shape: str, tol: float = 1e-12,
                    max_iter: int = 200_000) -> ChainSolution:
    """Value iteration under a reward shape, 'positive' or 'neutral'.

    Positive: non-expert moves and termination pay 0. Neutral: both pay -R.
    """
    if shape == "positive":
        loop_r, term_r = 0.0, 0.0
    elif shape == "neutral":
        loop_r, term_r = -mdp.reward_magnitude, -mdp.reward_magnitude
    else:
        raise ConfigurationError(f"unknown shape {shape!r}, want positive or neutral")
    term_state = -1 if mdp.early_terminate_state is None else mdp.early_terminate_state
    v, policy, iters = kernels.chain_value_iteration(
        mdp.path_length, mdp.reward_magnitude, mdp.gamma, loop_r,
        term_state, term_r, tol, max_iter)
    return ChainSolution(np.asarray(v), np.asarray(policy), int(iters))


# ---------------------------------------------------------------------------
# sweep table

CSV_COLUMNS = ("gamma", "p", "R", "expert_return", "loop_pos", "loop_neutral",
               "term_neutral", "prefers_loop_pos", "prefers_loop_neutral")


def bias_table(gammas, path_lengths, magnitudes) -> list[dict]:
    rows = []
    for g in gammas:
        for p in path_lengths:
            for r in magnitudes:
                s = BiasScenario(p, r, g)
                expert = expert_return(s)
                loop_pos = loop_return_positive(s)
                loop_neu = loop_return_neutral(s)
                rows.append({
                    "gamma": g, "p": p, "R": r,
                    "expert_return": expert,
                    "loop_pos": loop_pos,
                    "loop_neutral": loop_neu,
                    "term_neutral": terminate_return_neutral(s),
                    "prefers_loop_pos": int(loop_pos > expert),
                    "prefers_loop_neutral": int(loop_neu > expert),
                })
    return rows


def write_bias_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v)
                             for k, v in row.items()})
