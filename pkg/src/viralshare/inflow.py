"""Inflow accuracy: the expected share of new popularity that is correct.

Each arriving agent adds ``C + 1`` popularity points (C shares plus one
post).  Given viral accuracy ``x``, the expected fraction of those
points landing on correct stories is

    phi_sigma(x) = [q + sum_k P_k * (q * E[sigma(+1,k)]
                                     + (1-q) * E[sigma(-1,k)])] / (1 + C)

where ``P_k`` is the Binomial(K, theta) pmf at ``k`` and
``theta = lam * x + (1 - lam) * z`` is the sampling accuracy (the posted
fraction ``z`` defaults to its long-run value ``q``).  Steady states of
the process are the (one-side-)stable fixed points of ``phi_sigma``.

The majority rule admits closed forms for ``phi`` and ``phi'`` in terms
of binomial tails; these double as fast paths and as independent oracles
for the generic sum.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import binom

from .params import ModelParams, ParameterError
from .strategy import Strategy


def sampling_accuracy(x, params: ModelParams, z=None):
    """Probability a feed slot shows a correct story: lam*x + (1-lam)*z.

    ``z`` is the correct fraction of posted stories and defaults to q,
    its almost-sure long-run value.
    """
    xa = np.asarray(x, dtype=float)
    if np.any((xa < 0) | (xa > 1)):
        raise ParameterError(f"viral accuracy x must lie in [0, 1], got {x}")
    if z is None:
        z = params.q
    za = np.asarray(z, dtype=float)
    if np.any((za < 0) | (za > 1)):
        raise ParameterError(f"posted fraction z must lie in [0, 1], got {z}")
    out = params.lam * xa + (1.0 - params.lam) * za
    return float(out) if np.isscalar(x) and np.isscalar(z or 0.0) else out


def _observation_weights(sigma: Strategy, q: float) -> np.ndarray:
    """w_k = q * E[z | +1, k] + (1-q) * E[z | -1, k] for k = 0..K."""
    e = sigma.expectations()
    return q * e[1] + (1.0 - q) * e[0]


def inflow_accuracy(sigma: Strategy, params: ModelParams, x, z=None,
                    iota: float | None = None):
    """Evaluate (1 - iota) * phi_sigma at x (vectorized over x).

    With ``iota = 0`` and ``z = None`` this is exactly the inflow
    accuracy function; the ``iota`` scaling reflects bot arrivals that
    direct their C+1 points at incorrect stories, and the ``z`` variant
    is the drift kernel at an arbitrary posted fraction.
    """
    if iota is None:
        iota = params.iota
    if not 0.0 <= iota < 1.0:
        raise ParameterError(f"iota must be in [0, 1), got {iota}")
    theta = sampling_accuracy(x, params, z)
    K, C, q = params.K, params.C, params.q
    w = _observation_weights(sigma, q)
    pk = binom.pmf(np.arange(K + 1), K, np.atleast_1d(theta)[..., None])
    phi = (q + pk @ w) / (1.0 + C)
    phi = (1.0 - iota) * phi
    return float(phi[0]) if np.isscalar(theta) else phi.reshape(np.shape(theta))


def inflow_accuracy_majority(params: ModelParams, x, iota: float = 0.0):
    """Closed form of phi under the majority rule.

    Odd K:  phi = (q + C * P[Binom(K, theta) > K/2]) / (1 + C).
    Even K: the tie at k = K/2 goes with the private signal, adding
            q * pmf(K/2) inside the tail term.
    """
    theta = sampling_accuracy(x, params)
    K, C, q = params.K, params.C, params.q
    if K % 2 == 1:
        tail = binom.sf(K // 2, K, theta)
    else:
        tail = q * binom.pmf(K // 2, K, theta) + binom.sf(K // 2, K, theta)
    return (1.0 - iota) * (q + C * tail) / (1.0 + C)


def inflow_derivative(sigma: Strategy, params: ModelParams, x,
                      iota: float = 0.0):
    """Analytic d/dx of (1 - iota) * phi_sigma, via the pmf recurrence
    d P_k / d theta = K * (pmf(K-1, k-1) - pmf(K-1, k))."""
    theta = sampling_accuracy(x, params)
    K, C, q = params.K, params.C, params.q
    w = _observation_weights(sigma, q)
    ks = np.arange(K + 1)
    t = np.atleast_1d(theta)[..., None]
    dpk = K * (binom.pmf(ks - 1, K - 1, t) - binom.pmf(ks, K - 1, t))
    d = params.lam * (dpk @ w) / (1.0 + C)
    d = (1.0 - iota) * d
    return float(d[0]) if np.isscalar(theta) else d.reshape(np.shape(theta))


def inflow_derivative_majority(params: ModelParams, x, iota: float = 0.0):
    """Closed form of phi' under the majority rule (binomial tail derivative)."""
    theta = sampling_accuracy(x, params)
    K, C, q = params.K, params.C, params.q
    scale = (1.0 - iota) * C * params.lam * K / (1.0 + C)
    if K % 2 == 1:
        return scale * binom.pmf((K - 1) // 2, K - 1, theta)
    return scale * (q * binom.pmf(K // 2 - 1, K - 1, theta)
                    + (1.0 - q) * binom.pmf(K // 2, K - 1, theta))


def inflow_accuracy_bruteforce(sigma: Strategy, params: ModelParams, x,
                               z=None, iota: float = 0.0) -> float:
    """Independent slow oracle: enumerate every (s, k, z-action) triple.

    Spells out the defining expectation term by term with explicit
    binomial coefficients; used to pin the vectorized evaluation.
    """
    theta = float(sampling_accuracy(x, params, z))
    K, C, q = params.K, params.C, params.q
    import math
    total = q  # the arrival's own post lands correctly w.p. q
    for s in (-1, 1):
        p_s = q if s == 1 else 1.0 - q
        for k in range(K + 1):
            p_k = math.comb(K, k) * theta**k * (1.0 - theta) ** (K - k)
            for zz in range(C + 1):
                total += p_s * p_k * sigma.prob(s, k, zz) * zz
    return (1.0 - iota) * total / (1.0 + C)
