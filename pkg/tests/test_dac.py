"""Absorbing-state augmentation."""

from __future__ import annotations

import numpy as np
import pytest

from gailbias.dac import (
    ABSORBING_ACTION,
    absorbing_mask,
    absorbing_observation,
    absorbing_pair_features,
    absorbing_reward,
    apply_terminal_tails,
    augment_expert_transitions,
    terminal_reward,
    terminal_tail,
)
from gailbias.discriminator import (
    RewardKind,
    RewardSpec,
    init_discriminator,
    probs,
    rewards_from_probs,
)
from gailbias.errors import ConfigurationError
from gailbias.gridworld import EnvSpec, TerminationKind, obs_length


def test_absorbing_observation_layout():
    spec = EnvSpec.make("empty")
    obs = absorbing_observation(spec)
    assert obs.shape == (obs_length(spec),)
    assert obs[-1] == 1.0
    assert obs[:-1].sum() == 0.0
    feats = absorbing_pair_features(spec)
    assert feats.shape == (1, obs_length(spec) + 5)
    assert feats[0, obs_length(spec) + int(ABSORBING_ACTION)] == 1.0


def test_expert_augmentation_adds_one_pair_per_trajectory(dataset_factory):
    ds = dataset_factory("empty", n=25, seed=3)
    base_obs, base_actions = ds.stacked()
    obs, actions = augment_expert_transitions(ds)
    assert len(obs) == len(base_obs) + 25
    assert len(actions) == len(base_actions) + 25
    assert np.array_equal(obs[:len(base_obs)], base_obs)
    ab = absorbing_observation(ds.spec())
    for row in obs[len(base_obs):]:
        assert np.array_equal(row, ab)
    assert np.all(actions[len(base_actions):] == int(ABSORBING_ACTION))


def test_absorbing_mask_excludes_timeouts_and_running_steps():
    kinds = np.array([TerminationKind.NONE, TerminationKind.GOAL,
                      TerminationKind.TIMEOUT, TerminationKind.LAVA,
                      TerminationKind.TASK_DOOR_OPENED,
                      TerminationKind.NON_TASK_DOOR_OPENED], dtype=np.uint8)
    mask = absorbing_mask(kinds)
    assert mask.tolist() == [False, True, False, True, True, True]


def test_terminal_tail_closed_form():
    assert terminal_tail(0.5, 0.99) == pytest.approx(49.5, abs=1e-9)
    assert terminal_tail(1.0, 0.0) == 0.0
    with pytest.raises(ConfigurationError):
        terminal_tail(1.0, 1.0)
    with pytest.raises(ConfigurationError):
        terminal_tail(1.0, -0.1)


@pytest.mark.parametrize("gamma", [0.5, 0.9, 0.99, 0.999])
def test_terminal_tail_matches_truncated_series(gamma):
    # enough terms that the truncation error sits below the tolerance even
    # at gamma = 0.999
    r = 0.37
    series = float((r * gamma ** np.arange(1, 40_000)).sum())
    assert terminal_tail(r, gamma) == pytest.approx(series, abs=1e-8)


def test_goal_and_lava_produce_identical_discriminator_input():
    # the discriminator sees the same absorbing pair no matter how the
    # episode ended, so it cannot tell success from failure
    spec = EnvSpec.make("gotodoor")
    rng = np.random.Generator(np.random.PCG64(0))
    model = init_discriminator(obs_length(spec) + 5, 16, rng)
    feats = absorbing_pair_features(spec)
    d = float(probs(model, feats)[0])
    # identical features regardless of which terminal kind preceded them
    assert np.array_equal(absorbing_pair_features(spec), feats)
    reward_spec = RewardSpec(RewardKind.POSITIVE)
    r = absorbing_reward(model, spec, reward_spec)
    assert r == pytest.approx(
        float(rewards_from_probs(reward_spec, np.array([d]))[0]), abs=1e-12)
    tail = terminal_reward(model, reward_spec, 0.99)
    assert tail == pytest.approx(terminal_tail(r, 0.99), abs=1e-12)


def test_apply_terminal_tails_only_touches_absorbing_steps():
    rewards = np.array([0.1, 0.2, 0.3, 0.4])
    kinds = np.array([TerminationKind.NONE, TerminationKind.GOAL,
                      TerminationKind.TIMEOUT, TerminationKind.LAVA], dtype=np.uint8)
    out = apply_terminal_tails(rewards, kinds, 2.0)
    assert np.allclose(out, [0.1, 2.2, 0.3, 2.4])
    assert np.allclose(rewards, [0.1, 0.2, 0.3, 0.4])  # input untouched
