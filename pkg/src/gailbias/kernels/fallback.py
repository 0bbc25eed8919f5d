"""Pure-numpy implementations of the hot kernels.

Used when the compiled extension is unavailable (or forced via
GAILBIAS_KERNELS=python). Semantics match gailbias.kernels._core; floating
point rounding may differ in the last bits because BLAS reductions do not
fix an accumulation order.
"""
from __future__ import annotations

import numpy as np

# greedy-policy codes returned by chain_value_iteration
CHAIN_EXPERT = 0
CHAIN_LOOP = 1
CHAIN_TERMINATE = 2


def actor_forward(obs, w1, b1, wp, bp, wv, bv, slope):
    """Single-observation actor-critic forward pass.

    Returns (action probabilities, value estimate).
    """
    h = obs @ w1 + b1
    h = np.where(h > 0.0, h, slope * h)
    logits = h @ wp + bp
    shifted = logits - logits.max()
    e = np.exp(shifted)
    probs = e / e.sum()
    value = float(h @ wv + bv)
    return probs, value


def gae_scan(rewards, values, next_values, cont, gamma, lam):
    """Reverse-time generalized advantage scan.

    cont[t] is 1 when step t+1 continues the same episode inside the buffer,
    0 at episode ends and at the buffer boundary (next_values[t] then already
    holds the bootstrap value: 0 for true terminals, V(s_{t+1}) otherwise).
    """
    n = len(rewards)
    adv = np.empty(n, dtype=np.float64)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * next_values[t] - values[t]
        acc = delta + gamma * lam * acc * cont[t]
        adv[t] = acc
    return adv


def chain_value_iteration(p, reward, gamma, loop_reward, term_state, term_reward,
                          tol, max_iter):
    """Exact value iteration on the chain task MDP.

    States 0..p with p terminal (value 0). The task action at i<p advances to
    i+1 earning `reward`; the loop action earns `loop_reward` and backs up to
    i-1 (self-loop at 0); an optional terminate action at `term_state`
    (pass -1 for none) earns `term_reward` and ends the episode.

    Returns (values over states 0..p, greedy policy codes over states 0..p-1,
    iterations used).
    """
    v = np.zeros(p + 1, dtype=np.float64)
    back_idx = np.maximum(np.arange(p) - 1, 0)
    for it in range(1, max_iter + 1):
        q_e = reward + gamma * v[1:]
        q_b = loop_reward + gamma * v[back_idx]
        new = np.maximum(q_e, q_b)
        if term_state >= 0:
            new[term_state] = max(new[term_state], term_reward)
        diff = np.max(np.abs(new - v[:p]))
        v[:p] = new
        if diff < tol:
            break
    q_e = reward + gamma * v[1:]
    q_b = loop_reward + gamma * v[back_idx]
    policy = np.where(q_e >= q_b, CHAIN_EXPERT, CHAIN_LOOP).astype(np.int8)
    if term_state >= 0 and term_reward > max(q_e[term_state], q_b[term_state]):
        policy[term_state] = CHAIN_TERMINATE
    return v, policy, it
