"""Simulation-based equilibrium estimation.

Agents' posterior beliefs about the true state given an observation
``(s, k)`` have no closed form (the steady-state distribution itself
does not), so they are estimated by simulation: simulate under
``omega = +1``, pool realized observations over the post-seeding
positions, and use the state-symmetry identity

    P(omega=+1 | s, k) = N(s, k) / (N(s, k) + N(-s, K-k))

where ``N`` are observation counts under ``omega = +1``.  Best responses
to those beliefs, and indifference-mixing solutions within one-parameter
strategy families, follow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import run_ensemble
from .params import ModelParams
from .strategy import Strategy, contrarian_mix, feasible_z_bounds

LOW_CONFIDENCE_COUNT = 100


@dataclass(frozen=True)
class PosteriorTable:
    """Estimated P(omega=+1 | s, k) with counts and standard errors.

    Indexed like strategy tables: row 0 is s = -1, row 1 is s = +1.
    Cells with fewer than 100 raw observations are flagged low-confidence.
    """

    K: int
    probs: np.ndarray            # (2, K+1)
    counts: np.ndarray           # (2, K+1) raw observation counts
    standard_errors: np.ndarray  # (2, K+1)
    low_confidence: np.ndarray   # (2, K+1) bool
    runs: int
    base_seed: int

    def prob(self, s: int, k: int) -> float:
        return float(self.probs[(s + 1) // 2, k])

    def se(self, s: int, k: int) -> float:
        return float(self.standard_errors[(s + 1) // 2, k])

    def log_odds(self, s: int, k: int) -> float:
        p = self.prob(s, k)
        return math.log(p / (1.0 - p))


def posterior_table_from_counts(counts: np.ndarray, runs: int = 0,
                                base_seed: int = 0) -> PosteriorTable:
    """Build the posterior table from pooled observation counts.

    Uses add-one smoothing so empty cells never produce infinite odds:
    P = (N + 1) / (N + N_mirror + 2), with N_mirror the count of the
    state-symmetric observation (-s, K-k).
    """
    counts = np.asarray(counts, dtype=np.int64)
    K = counts.shape[1] - 1
    mirror = counts[::-1, ::-1]
    n_eff = counts + mirror + 2
    probs = (counts + 1) / n_eff
    ses = np.sqrt(probs * (1 - probs) / n_eff)
    return PosteriorTable(
        K=K, probs=probs, counts=counts, standard_errors=ses,
        low_confidence=counts < LOW_CONFIDENCE_COUNT,
        runs=runs, base_seed=base_seed,
    )


def empirical_posteriors(sigma: Strategy, params: ModelParams, m_runs: int,
                         base_seed: int,
                         observe_from: int = 0) -> PosteriorTable:
    """Estimate posteriors by simulating under omega = +1.

    Observations are pooled over every position K+1..n of every run
    (equivalent in expectation to sampling positions uniformly from that
    range, with strictly lower variance).  ``observe_from`` restricts the
    pool to positions strictly above the given arrival count; setting it
    to, say, n/2 discards the burn-in transient and estimates the
    steady-state (large-n limit) posteriors instead of the finite-n
    position average.
    """
    stats = run_ensemble(sigma, params, m_runs, base_seed,
                         collect_observations=True,
                         observe_from=observe_from)
    return posterior_table_from_counts(stats.observation_counts,
                                       runs=m_runs, base_seed=base_seed)


def iid_signal_log_odds(params: ModelParams, s: int, k: int) -> float:
    """Closed-form posterior log-odds when every feed story is an
    independent precision-q signal (the lam = 0 steady state)."""
    return (2 * k - params.K + s) * math.log(params.q / (1.0 - params.q))


@dataclass(frozen=True)
class BestResponse:
    """Pure best response to a posterior table, with indifference marks."""

    strategy: Strategy
    indifferent: np.ndarray      # (2, K+1) bool
    tol_se: float

    def matches(self, other: Strategy, ignore_indifferent: bool = True) -> bool:
        """True if the response agrees with ``other`` at every cell
        (optionally skipping indifferent cells)."""
        same = np.all(np.abs(self.strategy.table - other.table) < 1e-12,
                      axis=2)
        if ignore_indifferent:
            same = same | self.indifferent
        return bool(np.all(same))


def best_response(beliefs: PosteriorTable, params: ModelParams,
                  tol_se: float = 2.0) -> BestResponse:
    """Share-what-matches-the-likelier-state, cell by cell.

    P > 1/2: share as many positive stories as feasible (z = min(C, k));
    P < 1/2: as many negative (z = max(0, C - (K - k))).  Beliefs within
    ``tol_se`` standard errors of 1/2 are marked indifferent and resolved
    by following the private signal.
    """
    K, C = params.K, params.C
    tab = np.zeros((2, K + 1, C + 1))
    indiff = np.zeros((2, K + 1), dtype=bool)
    for s_idx in (0, 1):
        s = 2 * s_idx - 1
        for k in range(K + 1):
            lo, hi = feasible_z_bounds(K, C, k)
            p = beliefs.probs[s_idx, k]
            margin = tol_se * beliefs.standard_errors[s_idx, k]
            if abs(p - 0.5) <= margin:
                indiff[s_idx, k] = True
                z = hi if s == 1 else lo
            else:
                z = hi if p > 0.5 else lo
            tab[s_idx, k, z] = 1.0
    return BestResponse(
        strategy=Strategy(K, C, tab, name="best-response"),
        indifferent=indiff, tol_se=tol_se,
    )


# ---------------------------------------------------------------------------
# Indifference mixing within a one-parameter family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixingSolution:
    """Root of the belief gap p -> P(omega=+1 | pivot) - 1/2 over a grid."""

    p_grid: np.ndarray
    gaps: np.ndarray
    gap_ses: np.ndarray
    p_hat: float | None
    n: int
    status: str                  # "ok" or "no_interior_indifference"
    pivot: tuple[int, int]       # (s, k) observation used
    runs_per_point: int
    base_seed: int


def default_family(params: ModelParams):
    """The deviation-at-a-two-story-contradiction family around majority."""
    return lambda p: contrarian_mix(params, p)


def detect_pivot(family, params: ModelParams) -> tuple[int, int] | None:
    """The s = +1 observation where the family's action varies with p."""
    t0, t1 = family(0.0).table, family(1.0).table
    diff = np.any(np.abs(t0 - t1) > 1e-12, axis=2)
    ks = np.nonzero(diff[1])[0]
    if len(ks) == 0:
        return None
    return (1, int(ks[0]))


def solve_mixing_equilibrium(family, params: ModelParams, p_grid,
                             m_runs: int, base_seed: int = 0,
                             pivot: tuple[int, int] | None = None,
                             observe_from: int = 0) -> MixingSolution:
    """Estimate the mixing probability making the pivotal observation
    uninformative.

    For each candidate p, simulates the family member and evaluates the
    belief gap at the pivotal observation; the equilibrium estimate is
    the linear interpolation of the first sign change.  Without a sign
    change the result reports no interior indifference (for example,
    below the critical virality weight, where the majority rule
    best-responds to itself).

    With the default ``observe_from=0`` the beliefs are those of an
    agent at a uniformly random position, so p_hat is the finite-n
    mixing probability.  Passing ``observe_from`` (e.g. n/2) restricts
    beliefs to late positions, suppressing the burn-in transient's
    contribution and moving p_hat toward the large-n limit; note that
    slowly-settling runs keep a residual transient in any fixed window,
    so the estimate still approaches the limit only as the window start
    grows with n.
    """
    p_grid = np.asarray(sorted(p_grid), dtype=float)
    if pivot is None:
        pivot = detect_pivot(family, params)
    gaps = np.empty(len(p_grid))
    ses = np.empty(len(p_grid))
    for i, p in enumerate(p_grid):
        table = empirical_posteriors(family(float(p)), params, m_runs,
                                     base_seed + i,
                                     observe_from=observe_from)
        if pivot is None:
            # Degenerate (constant) family: measure the cell with belief
            # nearest 1/2, which is as close to pivotal as it has.
            flat = np.abs(table.probs - 0.5)
            s_idx, k = np.unravel_index(np.argmin(flat), flat.shape)
            pivot = (2 * int(s_idx) - 1, int(k))
        gaps[i] = table.prob(*pivot) - 0.5
        ses[i] = table.se(*pivot)
    sign = np.sign(gaps)
    p_hat, status = None, "no_interior_indifference"
    for i in range(len(p_grid) - 1):
        if sign[i] != 0 and sign[i + 1] != 0 and sign[i] != sign[i + 1]:
            g0, g1 = gaps[i], gaps[i + 1]
            p_hat = float(p_grid[i] - g0 * (p_grid[i + 1] - p_grid[i])
                          / (g1 - g0))
            status = "ok"
            break
    return MixingSolution(
        p_grid=p_grid, gaps=gaps, gap_ses=ses, p_hat=p_hat, n=params.n,
        status=status, pivot=pivot if pivot else (1, 0),
        runs_per_point=m_runs, base_seed=base_seed,
    )


@dataclass(frozen=True)
class LimitEstimate:
    """Plateau extrapolation of p_hat(n) along an n schedule."""

    solutions: list
    n_schedule: np.ndarray
    p_limit: float | None
    ci: tuple[float, float] | None
    plateaued: bool


def estimate_limit_equilibrium(family, params: ModelParams, n_schedule,
                               m_runs: int, p_grid, base_seed: int = 0,
                               plateau_tol: float = 0.05) -> LimitEstimate:
    """p_hat per n plus the terminal-plateau estimate.

    The limit is the mean over the last quartile of the schedule; its CI
    combines the per-point interpolation noise (propagated from the gap
    standard errors) with the spread across the quartile.  A last-quartile
    spread beyond ``plateau_tol`` flags a non-plateauing sequence.
    """
    n_schedule = np.asarray(sorted(n_schedule), dtype=int)
    sols = []
    for j, n in enumerate(n_schedule):
        sols.append(solve_mixing_equilibrium(
            family, params.with_(n=int(n)), p_grid, m_runs,
            base_seed + 1000 * j))
    tail = [s for s in sols[-max(1, len(sols) // 4):] if s.p_hat is not None]
    if not tail:
        return LimitEstimate(sols, n_schedule, None, None, False)
    vals = np.array([s.p_hat for s in tail])
    p_limit = float(vals.mean())
    spread = float(vals.max() - vals.min())
    # Per-point noise: gap SE divided by the local gap slope.
    noises = []
    for s in tail:
        slopes = np.abs(np.diff(s.gaps) / np.diff(s.p_grid))
        slope = max(float(np.median(slopes)), 1e-12)
        noises.append(float(np.mean(s.gap_ses)) / slope)
    half = 1.96 * math.sqrt(np.mean(np.square(noises)) / len(tail)
                            + np.var(vals) / len(vals))
    return LimitEstimate(
        solutions=sols, n_schedule=n_schedule, p_limit=p_limit,
        ci=(p_limit - half, p_limit + half),
        plateaued=spread <= plateau_tol,
    )
