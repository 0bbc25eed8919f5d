"""Reward-shape bias laboratory for adversarial imitation learning."""

__version__ = "0.1.0"
