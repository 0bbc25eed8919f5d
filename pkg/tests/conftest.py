"""Shared fixtures.

Expert datasets are expensive to plan, so they are generated once per
session and handed out by a factory fixture keyed on (env, n, seed).
"""

from __future__ import annotations

import numpy as np
import pytest

from gailbias.expert import generate_dataset
from gailbias.gridworld import EnvSpec


@pytest.fixture(scope="session")
def dataset_factory():
    cache = {}

    def get(env_name: str, n: int = 50, seed: int = 0):
        key = (env_name, n, seed)
        if key not in cache:
            cache[key] = generate_dataset(EnvSpec.make(env_name), n, seed)
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))
