"""Adversarial discriminator and the reward shapes derived from it.

The discriminator is a one-hidden-layer MLP over (observation, one-hot
action) features. It outputs the probability that a pair came from the
demonstration set: expert pairs carry label 1, agent pairs label 0, and
training minimizes the usual cross entropy

    mean_expert[-log D] + mean_agent[-log(1 - D)]

which sits at log 4 for an uninformative D = 1/2.

Rewards are different monotone readouts of the same probability d:

    positive            -log(max(eps, 1 - d))        range [0, log 1/eps]
    negative             log(max(eps, d))            range [-log 1/eps, 0]
    neutral              log d - log(1 - d), both clamped to [eps, 1-eps]
    constant_positive   -log(1/2), ignores d
    constant_negative    log(1/2), ignores d

All five are bounded by 2 log(1/eps) in magnitude. On [eps, 1-eps] the
neutral shape is exactly the sum of the positive and negative ones.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from gailbias.errors import ConfigurationError, UsageError
from gailbias.nets import Adam, leaky, leaky_grad, one_hot, sigmoid, softplus
from gailbias.gridworld import N_ACTIONS

# keep predicted probabilities strictly inside (0, 1)
_PROB_FLOOR = 1e-12


class RewardKind(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    CONSTANT_POSITIVE = "constant_positive"
    CONSTANT_NEGATIVE = "constant_negative"

    @staticmethod
    def parse(text: str) -> "RewardKind":
        try:
            return RewardKind(text.strip().lower())
        except ValueError:
            raise ConfigurationError(f"unknown reward kind: {text!r}") from None


@dataclass(frozen=True)
class RewardSpec:
    kind: RewardKind
    epsilon: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.5:
            raise ConfigurationError("reward epsilon must lie in (0, 0.5)")

    @property
    def is_constant(self) -> bool:
        return self.kind in (RewardKind.CONSTANT_POSITIVE, RewardKind.CONSTANT_NEGATIVE)

    def bound(self) -> float:
        """Uniform bound on |reward| across the catalog."""
        return 2.0 * np.log(1.0 / self.epsilon)


def reward_from_prob(spec: RewardSpec, d: float) -> float:
    return float(rewards_from_probs(spec, np.asarray([d], dtype=np.float64))[0])


def rewards_from_probs(spec: RewardSpec, d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if np.any(d <= 0.0) or np.any(d >= 1.0):
        raise UsageError("discriminator probabilities must lie strictly in (0, 1)")
    eps = spec.epsilon
    kind = spec.kind
    if kind == RewardKind.POSITIVE:
        return -np.log(np.maximum(eps, 1.0 - d))
    if kind == RewardKind.NEGATIVE:
        return np.log(np.maximum(eps, d))
    if kind == RewardKind.NEUTRAL:
        dc = np.clip(d, eps, 1.0 - eps)
        return np.log(dc) - np.log(1.0 - dc)
    if kind == RewardKind.CONSTANT_POSITIVE:
        return np.full(d.shape, -np.log(0.5))
    return np.full(d.shape, np.log(0.5))


# ---------------------------------------------------------------------------
# model


@dataclass
class Discriminator:
    w1: np.ndarray  # (input_dim, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: np.ndarray  # (1,)
    opt: Adam

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


def init_discriminator(input_dim: int, hidden_dim: int, rng: np.random.Generator,
                       learning_rate: float = 3e-4) -> Discriminator:
    w1 = rng.normal(0.0, 1.0 / np.sqrt(input_dim), size=(input_dim, hidden_dim))
    b1 = np.zeros(hidden_dim)
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden_dim), size=hidden_dim)
    b2 = np.zeros(1)
    params = [w1, b1, w2, b2]
    return Discriminator(w1, b1, w2, b2, Adam(params, learning_rate))


def build_features(obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Discriminator input rows: observation concatenated with one-hot action."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim == 1:
        obs = obs[None, :]
        actions = np.asarray([actions])
    return np.concatenate([obs, one_hot(np.asarray(actions, dtype=np.intp), N_ACTIONS)], axis=1)


def logits(model: Discriminator, feats: np.ndarray) -> np.ndarray:
    h = leaky(feats @ model.w1 + model.b1)
    return h @ model.w2 + model.b2[0]


def probs(model: Discriminator, feats: np.ndarray) -> np.ndarray:
    if feats.shape[-1] != model.input_dim:
        raise UsageError(f"feature width {feats.shape[-1]} does not match "
                         f"discriminator input_dim {model.input_dim}")
    return np.clip(sigmoid(logits(model, feats)), _PROB_FLOOR, 1.0 - _PROB_FLOOR)


def prob(model: Discriminator, obs: np.ndarray, action: int) -> float:
    """P(expert) for a single (observation, action) pair."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (model.input_dim - N_ACTIONS,):
        raise UsageError(f"observation length {obs.shape} does not match "
                         f"discriminator input_dim {model.input_dim} - {N_ACTIONS}")
    return float(probs(model, build_features(obs, action))[0])


def loss_and_grads(model: Discriminator, expert_feats: np.ndarray,
                   agent_feats: np.ndarray):
    """Cross-entropy loss and its exact gradients for one balanced batch."""
    n_e, n_a = len(expert_feats), len(agent_feats)
    x = np.concatenate([expert_feats, agent_feats])
    z1 = x @ model.w1 + model.b1
    h = leaky(z1)
    z = h @ model.w2 + model.b2[0]
    loss = (softplus(-z[:n_e]).mean() if n_e else 0.0) \
        + (softplus(z[n_e:]).mean() if n_a else 0.0)
    s = sigmoid(z)
    g_z = np.empty_like(z)
    g_z[:n_e] = (s[:n_e] - 1.0) / max(n_e, 1)
    g_z[n_e:] = s[n_e:] / max(n_a, 1)
    g_h = np.outer(g_z, model.w2) * leaky_grad(z1)
    grads = [x.T @ g_h, g_h.sum(axis=0), h.T @ g_z, np.array([g_z.sum()])]
    return float(loss), grads


def train_epoch(model: Discriminator, expert_feats: np.ndarray, agent_feats: np.ndarray,
                steps: int, rng: np.random.Generator, batch_size: int = 256) -> float:
    """SGD steps on balanced expert/agent minibatches; returns mean loss."""
    if len(expert_feats) == 0 or len(agent_feats) == 0:
        raise UsageError("discriminator training needs non-empty expert and agent sets")
    half = max(batch_size // 2, 1)
    total = 0.0
    for _ in range(steps):
        e_idx = rng.integers(0, len(expert_feats), size=half)
        a_idx = rng.integers(0, len(agent_feats), size=half)
        loss, grads = loss_and_grads(model, expert_feats[e_idx], agent_feats[a_idx])
        model.opt.step(model.params(), grads)
        total += loss
    return total / max(steps, 1)
