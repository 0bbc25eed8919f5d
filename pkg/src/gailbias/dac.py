"""Absorbing-state augmentation (on-policy DAC variant).

Episode ends other than timeouts are modeled as entering an absorbing
state: an all-zero observation with the trailing indicator set, paired
with action 0. Expert demonstrations gain one absorbing transition per
trajectory, terminated agent episodes contribute one absorbing pair to the
discriminator's agent batch, and the learned reward at the absorbing pair
is summed analytically over the infinite tail instead of being simulated:

    sum_{k>=1} gamma^k r_abs = gamma / (1 - gamma) * r_abs

added to the reward of the transition that entered the absorbing state.
Timeouts are truncations and get no tail.
"""
from __future__ import annotations

import numpy as np

from gailbias.errors import ConfigurationError
from gailbias.discriminator import (
    Discriminator, RewardSpec, build_features, probs, rewards_from_probs,
)
from gailbias.expert import Dataset
from gailbias.gridworld import Action, EnvSpec, N_ACTIONS, TerminationKind, obs_length

ABSORBING_ACTION = Action.TURN_LEFT

_ABSORBING_KINDS = (TerminationKind.GOAL, TerminationKind.LAVA,
                    TerminationKind.TASK_DOOR_OPENED,
                    TerminationKind.NON_TASK_DOOR_OPENED)


def absorbing_observation(spec: EnvSpec) -> np.ndarray:
    obs = np.zeros(obs_length(spec), dtype=np.float64)
    obs[-1] = 1.0
    return obs


def absorbing_pair_features(spec: EnvSpec) -> np.ndarray:
    """Single discriminator input row for the absorbing (s, a) pair."""
    return build_features(absorbing_observation(spec), int(ABSORBING_ACTION))


def augment_expert_transitions(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Dataset transitions plus one absorbing pair per trajectory."""
    obs, actions = dataset.stacked()
    k = len(dataset.trajectories)
    ab = absorbing_observation(dataset.spec())
    obs = np.concatenate([obs, np.tile(ab, (k, 1))])
    actions = np.concatenate([actions, np.full(k, int(ABSORBING_ACTION), dtype=np.intp)])
    return obs, actions


def absorbing_mask(kinds: np.ndarray) -> np.ndarray:
    """True at buffer steps whose transition entered the absorbing state."""
    kinds = np.asarray(kinds)
    mask = np.zeros(kinds.shape, dtype=bool)
    for kind in _ABSORBING_KINDS:
        mask |= kinds == int(kind)
    return mask


def terminal_tail(reward: float, gamma: float) -> float:
    """Discounted value of repeating `reward` forever, starting next step."""
    if not 0.0 <= gamma < 1.0:
        raise ConfigurationError("terminal tail needs gamma in [0, 1)")
    return gamma / (1.0 - gamma) * reward


def absorbing_reward(model: Discriminator, spec: EnvSpec,
                     reward_spec: RewardSpec) -> float:
    """Learned reward at the absorbing pair under the current discriminator."""
    d = probs(model, absorbing_pair_features(spec))
    return float(rewards_from_probs(reward_spec, d)[0])


def terminal_reward(model: Discriminator, reward_spec: RewardSpec,
                    gamma: float) -> float:
    """Analytic absorbing-tail reward (gamma/(1-gamma)) * r_abs, with the
    absorbing observation shaped from the discriminator's own input width."""
    obs = np.zeros(model.input_dim - N_ACTIONS, dtype=np.float64)
    obs[-1] = 1.0
    d = probs(model, build_features(obs, int(ABSORBING_ACTION)))
    return terminal_tail(float(rewards_from_probs(reward_spec, d)[0]), gamma)


def apply_terminal_tails(rewards: np.ndarray, kinds: np.ndarray,
                         tail: float) -> np.ndarray:
    """Rewards with the analytic absorbing tail added at entering steps."""
    out = np.array(rewards, dtype=np.float64, copy=True)
    out[absorbing_mask(kinds)] += tail
    return out
