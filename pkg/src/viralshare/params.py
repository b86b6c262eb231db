"""Model parameters for the sharing platform.

The environment is described by the story precision ``q``, the news-feed
size ``K``, the sharing capacity ``C``, the virality weight ``lam``, the
number of agents ``n``, and the manipulation (bot) rate ``iota``.

The per-story sharing utility ``u > 0`` is deliberately not represented:
it is a positive scale factor on payoffs and never changes which sharing
decision is optimal, so everything here fixes ``u = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


class ParameterError(ValueError):
    """Raised when a parameter tuple violates the model's domain."""


@dataclass(frozen=True)
class ModelParams:
    """Environment tuple ``(q, K, C, lam, n, iota)``.

    Valid domains: ``0.5 < q < 1``, ``K >= 2``, ``1 <= C <= K/2``,
    ``0 <= lam <= 1``, ``n > K``, ``0 <= iota < 1``.
    """

    q: float
    K: int
    C: int
    lam: float = 0.0
    n: int = 20_000
    iota: float = 0.0

    def __post_init__(self) -> None:
        if not 0.5 < self.q < 1.0:
            raise ParameterError(f"story precision q must be in (0.5, 1), got {self.q}")
        if int(self.K) != self.K or self.K < 2:
            raise ParameterError(f"feed size K must be an integer >= 2, got {self.K}")
        if int(self.C) != self.C or self.C < 1 or 2 * self.C > self.K:
            raise ParameterError(
                f"capacity C must be an integer with 1 <= C <= K/2, got C={self.C}, K={self.K}"
            )
        if not 0.0 <= self.lam <= 1.0:
            raise ParameterError(f"virality weight lam must be in [0, 1], got {self.lam}")
        if int(self.n) != self.n or self.n <= self.K:
            raise ParameterError(f"agent count n must be an integer > K, got {self.n}")
        if not 0.0 <= self.iota < 1.0:
            raise ParameterError(f"manipulation rate iota must be in [0, 1), got {self.iota}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "C", int(self.C))
        object.__setattr__(self, "n", int(self.n))

    def with_(self, **kwargs) -> "ModelParams":
        """Return a copy with the given fields replaced (re-validated)."""
        return replace(self, **kwargs)
