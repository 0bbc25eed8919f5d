"""On-policy actor-critic trained with clipped PPO.

Everything runs in float64 numpy with hand-derived gradients; no autodiff
framework. The actor and critic share one leaky-relu trunk. Rollout
collection is strictly sequential over a single environment instance so a
(seed, policy) pair always yields the same buffer.

Timeouts are truncations, not failures: the advantage target bootstraps
from V(s_{t+1}) at a timeout or buffer cut and from 0 only at real
terminals. The per-step reward is supplied by the caller after collection,
which keeps this module independent of the discriminator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from gailbias import kernels
from gailbias.errors import ConfigurationError
from gailbias.gridworld import (
    Action, EnvSpec, TerminationKind, obs_length, reset, step,
)
from gailbias.nets import LEAKY_SLOPE, Adam, leaky, leaky_grad, log_softmax

_ROLLOUT_SEED_TAG = 0x524F4C4C


@dataclass(frozen=True)
class PPOConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    learning_rate: float = 3e-4
    rollout_horizon: int = 2048
    epochs_per_update: int = 4
    minibatch_size: int = 256
    hidden_dim: int = 64

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in [0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ConfigurationError("gae_lambda must lie in [0, 1]")
        if self.clip_ratio <= 0.0:
            raise ConfigurationError("clip_ratio must be positive")
        for name in ("rollout_horizon", "epochs_per_update", "minibatch_size", "hidden_dim"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")


@dataclass
class Policy:
    w1: np.ndarray  # (obs_dim, hidden)
    b1: np.ndarray  # (hidden,)
    wp: np.ndarray  # (hidden, n_actions)
    bp: np.ndarray  # (n_actions,)
    wv: np.ndarray  # (hidden,)
    bv: np.ndarray  # (1,)
    opt: Adam

    @property
    def obs_dim(self) -> int:
        return self.w1.shape[0]

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.wp, self.bp, self.wv, self.bv]


def init_policy(obs_dim: int, cfg: PPOConfig, rng: np.random.Generator) -> Policy:
    h = cfg.hidden_dim
    w1 = rng.normal(0.0, 1.0 / np.sqrt(obs_dim), size=(obs_dim, h))
    b1 = np.zeros(h)
    # small output heads keep the initial policy near uniform
    wp = rng.normal(0.0, 0.01 / np.sqrt(h), size=(h, len(Action)))
    bp = np.zeros(len(Action))
    wv = rng.normal(0.0, 1.0 / np.sqrt(h), size=h)
    bv = np.zeros(1)
    params = [w1, b1, wp, bp, wv, bv]
    return Policy(w1, b1, wp, bp, wv, bv, Adam(params, cfg.learning_rate))


def distribution(policy: Policy, obs: np.ndarray) -> tuple[np.ndarray, float]:
    """Action probabilities and value estimate for one observation."""
    obs = np.ascontiguousarray(obs, dtype=np.float64)
    return kernels.actor_forward(obs, policy.w1, policy.b1, policy.wp, policy.bp,
                                 policy.wv, float(policy.bv[0]), LEAKY_SLOPE)


def act(policy: Policy, obs: np.ndarray, rng: np.random.Generator):
    """Sample an action; returns (action, log probability, value)."""
    probs, value = distribution(policy, obs)
    u = rng.random()
    a = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    if a >= len(probs) or probs[a] <= 0.0:
        a = int(np.argmax(probs))
    return a, float(np.log(probs[a])), value


def greedy_action(policy: Policy, obs: np.ndarray) -> int:
    probs, _ = distribution(policy, obs)
    return int(np.argmax(probs))


# ---------------------------------------------------------------------------
# rollout collection


class EpisodeRecord(NamedTuple):
    length: int
    kind: TerminationKind
    env_reward: float


@dataclass
class Rollout:
    obs: np.ndarray          # (T, D)
    actions: np.ndarray      # (T,)
    logprobs: np.ndarray     # (T,) log pi(a_t | s_t) at collection time
    values: np.ndarray       # (T,)
    next_values: np.ndarray  # (T,) bootstrap target past step t
    cont: np.ndarray         # (T,) uint8, 1 iff t+1 continues the episode in-buffer
    kinds: np.ndarray        # (T,) uint8 termination kind recorded at each step
    env_rewards: np.ndarray  # (T,) true env reward, metrics only, never learned from
    episodes: list[EpisodeRecord]
    rewards: Optional[np.ndarray] = None  # (T,) learning reward, filled by the caller

    def __len__(self) -> int:
        return len(self.actions)


class RolloutCollector:
    """Sequential experience collector that owns the environment state.

    Partial episodes persist across collect() calls, so consecutive buffers
    tile one continuous stream of experience.
    """

    def __init__(self, spec: EnvSpec, seed: int):
        self.spec = spec
        self.rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([seed, _ROLLOUT_SEED_TAG])))
        self._state = None
        self._obs = None

    def collect(self, policy: Policy, horizon: int) -> Rollout:
        dim = obs_length(self.spec)
        obs_buf = np.empty((horizon, dim), dtype=np.float64)
        actions = np.empty(horizon, dtype=np.intp)
        logprobs = np.empty(horizon, dtype=np.float64)
        values = np.empty(horizon, dtype=np.float64)
        next_values = np.zeros(horizon, dtype=np.float64)
        cont = np.zeros(horizon, dtype=np.uint8)
        kinds = np.zeros(horizon, dtype=np.uint8)
        env_rewards = np.zeros(horizon, dtype=np.float64)
        episodes: list[EpisodeRecord] = []

        for t in range(horizon):
            if self._state is None:
                episode_seed = int(self.rng.integers(0, 2 ** 62))
                self._state, self._obs = reset(self.spec, episode_seed)
            obs_buf[t] = self._obs
            a, logp, value = act(policy, self._obs, self.rng)
            actions[t] = a
            logprobs[t] = logp
            values[t] = value
            res = step(self._state, Action(a))
            kinds[t] = res.kind
            env_rewards[t] = res.env_reward
            if res.done:
                episodes.append(EpisodeRecord(
                    res.state.step_count, res.kind, res.env_reward))
                if res.kind == TerminationKind.TIMEOUT:
                    next_values[t] = distribution(policy, res.obs)[1]
                self._state = None
                self._obs = None
            elif t == horizon - 1:
                # buffer cut mid-episode: bootstrap, episode resumes next call
                next_values[t] = distribution(policy, res.obs)[1]
                self._state = res.state
                self._obs = res.obs
            else:
                cont[t] = 1
                self._state = res.state
                self._obs = res.obs

        idx = np.nonzero(cont)[0]
        next_values[idx] = values[idx + 1]
        return Rollout(obs_buf, actions, logprobs, values, next_values,
                       cont, kinds, env_rewards, episodes)


def collect_rollouts(collector: RolloutCollector, policy: Policy, horizon: int,
                     reward_fn) -> Rollout:
    """Collect a buffer and fill its learning rewards.

    reward_fn maps (observations (T, D), actions (T,)) to per-step rewards;
    in adversarial training it wraps the current discriminator.
    """
    rollout = collector.collect(policy, horizon)
    rollout.rewards = np.ascontiguousarray(
        reward_fn(rollout.obs, rollout.actions), dtype=np.float64)
    return rollout


def compute_gae(rollout: Rollout, cfg: PPOConfig):
    """Advantages and value targets for the buffer under rollout.rewards."""
    if rollout.rewards is None:
        raise ConfigurationError("rollout has no rewards; fill them first")
    adv = kernels.gae_scan(np.ascontiguousarray(rollout.rewards, dtype=np.float64),
                           rollout.values, rollout.next_values, rollout.cont,
                           cfg.gamma, cfg.gae_lambda)
    return adv, adv + rollout.values


# ---------------------------------------------------------------------------
# PPO update


def surrogate_loss_and_grads(policy: Policy, cfg: PPOConfig, obs: np.ndarray,
                             actions: np.ndarray, old_logp: np.ndarray,
                             adv: np.ndarray, returns: np.ndarray):
    """Clipped-surrogate + value + entropy loss with exact gradients.

    Returns (loss, gradients aligned with policy.params(), diagnostics).
    """
    n = len(actions)
    z1 = obs @ policy.w1 + policy.b1
    h = leaky(z1)
    logits = h @ policy.wp + policy.bp
    logp_all = log_softmax(logits)
    pi = np.exp(logp_all)
    v = h @ policy.wv + policy.bv[0]

    rows = np.arange(n)
    logp_a = logp_all[rows, actions]
    ratio = np.exp(logp_a - old_logp)
    clipped = np.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio)
    surr1 = ratio * adv
    surr2 = clipped * adv
    policy_loss = -np.minimum(surr1, surr2).mean()
    value_err = v - returns
    value_loss = 0.5 * np.mean(value_err ** 2)
    entropy = -(pi * logp_all).sum(axis=1)
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy.mean()

    # d(policy_loss)/d(logp_a): only where the unclipped branch is active
    active = surr1 <= surr2
    coeff = np.where(active, -ratio * adv, 0.0) / n
    g_logits = coeff[:, None] * (-pi)
    g_logits[rows, actions] += coeff
    # entropy term: dH/dz_k = -p_k (log p_k + H)
    g_logits += (cfg.entropy_coef / n) * pi * (logp_all + entropy[:, None])
    g_v = (cfg.value_coef / n) * value_err

    g_h = g_logits @ policy.wp.T + np.outer(g_v, policy.wv)
    g_z1 = g_h * leaky_grad(z1)
    grads = [obs.T @ g_z1, g_z1.sum(axis=0),
             h.T @ g_logits, g_logits.sum(axis=0),
             h.T @ g_v, np.array([g_v.sum()])]
    info = {
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy.mean()),
        "approx_kl": float(np.mean(old_logp - logp_a)),
        "clip_fraction": float(np.mean((ratio < 1.0 - cfg.clip_ratio)
                                       | (ratio > 1.0 + cfg.clip_ratio))),
    }
    return float(loss), grads, info


def ppo_update(policy: Policy, cfg: PPOConfig, rollout: Rollout,
               advantages: np.ndarray, returns: np.ndarray,
               rng: np.random.Generator) -> dict:
    """Several epochs of minibatch updates; advantages normalized once."""
    adv = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    t_total = len(rollout)
    sums: dict[str, float] = {}
    batches = 0
    for _ in range(cfg.epochs_per_update):
        perm = rng.permutation(t_total)
        for start in range(0, t_total, cfg.minibatch_size):
            mb = perm[start:start + cfg.minibatch_size]
            _, grads, info = surrogate_loss_and_grads(
                policy, cfg, rollout.obs[mb], rollout.actions[mb],
                rollout.logprobs[mb], adv[mb], returns[mb])
            policy.opt.step(policy.params(), grads)
            for key, val in info.items():
                sums[key] = sums.get(key, 0.0) + val
            batches += 1
    return {key: val / batches for key, val in sums.items()}
