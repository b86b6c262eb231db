"""Shared helpers for the test suite."""

import numpy as np

from viralshare.strategy import Strategy, feasible_z_bounds


def random_strategy(rng: np.random.Generator, K: int, C: int) -> Strategy:
    """A valid random strategy: mass spread over the feasible range."""
    tab = np.zeros((2, K + 1, C + 1))
    for s_idx in (0, 1):
        for k in range(K + 1):
            lo, hi = feasible_z_bounds(K, C, k)
            w = rng.random(hi - lo + 1)
            tab[s_idx, k, lo:hi + 1] = w / w.sum()
    return Strategy(K, C, tab)
