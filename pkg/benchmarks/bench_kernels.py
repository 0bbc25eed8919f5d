#!/usr/bin/env python3
"""Timing comparison between the compiled kernels and the numpy fallback.

Run after an editable install:

    python3 benchmarks/bench_kernels.py

The actor forward pass dominates training wall time (one call per
environment step), so that row is the one that matters most.
"""
from __future__ import annotations

import time

import numpy as np

from gailbias.kernels import fallback

try:
    from gailbias.kernels import _core
except ImportError:
    _core = None


def _bench(fn, *args, repeat: int = 5, min_time: float = 0.2) -> float:
    """Best-of-repeat average seconds per call."""
    # calibrate the inner loop count
    fn(*args)
    n = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(n):
            fn(*args)
        elapsed = time.perf_counter() - t0
        if elapsed >= min_time:
            break
        n = max(n + 1, int(n * min_time / max(elapsed, 1e-9) * 1.2))
    best = elapsed / n
    for _ in range(repeat - 1):
        t0 = time.perf_counter()
        for _ in range(n):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / n)
    return best


def actor_forward_args(rng):
    obs_dim, hidden = 490, 64
    obs = np.zeros(obs_dim)
    obs[rng.choice(obs_dim, size=40, replace=False)] = 1.0
    w1 = rng.normal(size=(obs_dim, hidden))
    b1 = rng.normal(size=hidden)
    wp = rng.normal(size=(hidden, 5))
    bp = rng.normal(size=5)
    wv = rng.normal(size=hidden)
    return obs, w1, b1, wp, bp, wv, 0.0, 0.01


def gae_scan_args(rng):
    n = 2048
    rewards = rng.normal(size=n)
    values = rng.normal(size=n)
    next_values = rng.normal(size=n)
    cont = (rng.random(n) < 0.95).astype(np.uint8)
    return rewards, values, next_values, cont, 0.99, 0.95


def chain_vi_args(_rng):
    return 15, 1.0, 0.99, 0.0, -1, 0.0, 1e-12, 200_000


CASES = [
    ("actor_forward (490->64->5)", "actor_forward", actor_forward_args),
    ("gae_scan (T=2048)", "gae_scan", gae_scan_args),
    ("chain_value_iteration (p=15, g=0.99)", "chain_value_iteration",
     chain_vi_args),
]


def main() -> int:
    rng = np.random.Generator(np.random.PCG64(0))
    print(f"{'kernel':<38} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for label, name, make_args in CASES:
        args = make_args(rng)
        t_py = _bench(getattr(fallback, name), *args)
        if _core is None:
            print(f"{label:<38} {t_py * 1e6:>10.1f}us {'n/a':>12} {'n/a':>9}")
            continue
        t_c = _bench(getattr(_core, name), *args)
        print(f"{label:<38} {t_py * 1e6:>10.1f}us {t_c * 1e6:>10.1f}us "
              f"{t_py / t_c:>8.1f}x")
    if _core is None:
        print("\ncompiled extension not built; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
