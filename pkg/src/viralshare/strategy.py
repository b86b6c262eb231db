"""Sharing strategies over the observation space (private signal, feed count).

A strategy maps an observation ``(s, k)`` -- private signal ``s`` in
``{-1, +1}`` and ``k`` = number of positive stories in the ``K``-story
feed -- to a distribution over ``z`` in ``{0..C}``, the number of
positive stories shared.  Signals are encoded internally by the row
index ``s_idx = (s + 1) // 2`` (0 for ``s = -1``, 1 for ``s = +1``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams, ParameterError

PROB_TOL = 1e-12


class StrategyError(ValueError):
    """Raised for infeasible or non-normalized strategy tables."""


def _s_idx(s: int) -> int:
    if s not in (-1, 1):
        raise StrategyError(f"signal must be -1 or +1, got {s}")
    return (s + 1) // 2


def feasible_z_bounds(K: int, C: int, k: int) -> tuple[int, int]:
    """Feasible range of positive shares given k positive stories in the feed."""
    return max(0, C - (K - k)), min(C, k)


@dataclass(frozen=True)
class Strategy:
    """Immutable strategy table of shape ``(2, K+1, C+1)``.

    ``table[s_idx, k, z]`` is the probability of sharing ``z`` positive
    stories at observation ``(s, k)``.  Rows must be probability vectors
    (within ``1e-12``, renormalized on construction) supported on the
    feasible range ``[max(0, C-(K-k)), min(C, k)]``.
    """

    K: int
    C: int
    table: np.ndarray = field(repr=False)
    name: str = "custom"

    def __post_init__(self) -> None:
        tab = np.asarray(self.table, dtype=float)
        if tab.shape != (2, self.K + 1, self.C + 1):
            raise StrategyError(
                f"table shape {tab.shape} != (2, {self.K + 1}, {self.C + 1})"
            )
        if np.any(tab < -PROB_TOL):
            raise StrategyError("negative probabilities in strategy table")
        tab = np.clip(tab, 0.0, None)
        sums = tab.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > PROB_TOL):
            bad = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)[0]
            raise StrategyError(
                f"row (s_idx={bad[0]}, k={bad[1]}) sums to {sums[tuple(bad)]!r}, not 1"
            )
        tab = tab / sums[:, :, None]
        for k in range(self.K + 1):
            lo, hi = feasible_z_bounds(self.K, self.C, k)
            off = np.concatenate([tab[:, k, :lo], tab[:, k, hi + 1:]], axis=1)
            if np.any(off > PROB_TOL):
                raise StrategyError(
                    f"support outside feasible range [{lo}, {hi}] at k={k}"
                )
            tab[:, k, :lo] = 0.0
            tab[:, k, hi + 1:] = 0.0
        tab.setflags(write=False)
        object.__setattr__(self, "table", tab)

    # -- queries ---------------------------------------------------------

    def prob(self, s: int, k: int, z: int) -> float:
        return float(self.table[_s_idx(s), k, z])

    def expectation(self, s: int, k: int) -> float:
        """E[z | s, k], the expected number of positive stories shared."""
        if not 0 <= k <= self.K:
            raise StrategyError(f"k={k} outside [0, {self.K}]")
        return float(self.table[_s_idx(s), k] @ np.arange(self.C + 1))

    def expectations(self) -> np.ndarray:
        """Array of shape (2, K+1) with E[z | s, k]; row 0 is s=-1, row 1 is s=+1."""
        return self.table @ np.arange(self.C + 1, dtype=float)

    def cdf_table(self) -> np.ndarray:
        """Cumulative table used for inverse-CDF sampling of z."""
        return np.cumsum(self.table, axis=2)

    def is_state_symmetric(self, tol: float = PROB_TOL) -> bool:
        """True if sigma(s,k)(z) == sigma(-s,K-k)(C-z) for all entries."""
        mirrored = self.table[::-1, ::-1, ::-1]
        return bool(np.all(np.abs(self.table - mirrored) <= tol))

    def mirror(self) -> "Strategy":
        """The strategy with the roles of positive and negative stories swapped."""
        return Strategy(self.K, self.C, self.table[::-1, ::-1, ::-1].copy(),
                        name=f"mirror({self.name})")

    # -- serialization ---------------------------------------------------

    def to_json(self) -> str:
        obj = {
            "K": self.K,
            "C": self.C,
            "table": {
                "s=+1": [[float(p) for p in row] for row in self.table[1]],
                "s=-1": [[float(p) for p in row] for row in self.table[0]],
            },
        }
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str, name: str = "custom") -> "Strategy":
        obj = json.loads(text)
        K, C = int(obj["K"]), int(obj["C"])
        tab = np.empty((2, K + 1, C + 1))
        tab[1] = obj["table"]["s=+1"]
        tab[0] = obj["table"]["s=-1"]
        return cls(K, C, tab, name=name)


def majority_rule(params: ModelParams, tie_break: str = "feed") -> Strategy:
    """Share C copies of the feed-majority realization; ties go to the signal.

    ``tie_break`` selects the convention at observations where the feed
    carries no net information relative to the private signal:

    * ``"feed"``  -- the standard rule: share all positive iff ``k > K/2``,
      or ``k == K/2`` with ``s = +1``.
    * ``"signal"`` -- additionally follow the private signal at one-story
      feed majorities that contradict it (``|2k - K| == 1`` with the
      majority opposite to ``s``).  At ``lam = 0`` both conventions are
      best responses; neither is singled out by the model.
    """
    if tie_break not in ("feed", "signal"):
        raise ParameterError(f"unknown tie_break {tie_break!r}")
    K, C = params.K, params.C
    tab = np.zeros((2, K + 1, C + 1))
    for s in (-1, 1):
        for k in range(K + 1):
            share_pos = k > K / 2 or (2 * k == K and s == 1)
            if tie_break == "signal" and abs(2 * k - K) == 1:
                share_pos = s == 1
            tab[_s_idx(s), k, C if share_pos else 0] = 1.0
    name = "majority" if tie_break == "feed" else "majority-signal-ties"
    return Strategy(K, C, tab, name=name)


def contrarian_mix(params: ModelParams, p: float, k_dev: int | None = None) -> Strategy:
    """One-parameter deviation family around the majority rule.

    Identical to the majority rule except at the observation where the
    feed contradicts the private signal by exactly two stories: for
    ``s = +1`` that is ``k_dev = ceil(K/2) - 1`` positive stories.  There
    the agent shares all ``k_dev`` minority (signal-matching) stories,
    topped up with majority stories, with probability ``p``; with
    probability ``1 - p`` it plays the majority action.  The mirrored
    observation ``(s=-1, K-k_dev)`` deviates symmetrically.
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"mixing probability p must be in [0, 1], got {p}")
    K, C = params.K, params.C
    if k_dev is None:
        k_dev = (K + 1) // 2 - 1
    if not 0 <= k_dev < K / 2:
        raise ParameterError(f"deviation cell k_dev={k_dev} is not a feed minority")
    base = majority_rule(params)
    tab = base.table.copy()
    z_dev = min(C, k_dev)
    z_maj = max(0, C - (K - k_dev))
    tab[1, k_dev, :] = 0.0
    tab[1, k_dev, z_dev] = p
    tab[1, k_dev, z_maj] += 1.0 - p
    tab[0, K - k_dev, :] = 0.0
    tab[0, K - k_dev, C - z_dev] = p
    tab[0, K - k_dev, C - z_maj] += 1.0 - p
    return Strategy(K, C, tab, name=f"contrarian-mix(p={p:g},k={k_dev})")
