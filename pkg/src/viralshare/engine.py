"""Exact Monte Carlo simulation of the sharing process.

The platform is tracked through its sufficient statistic: story counts
and total popularity scores by realization, with the true state fixed to
``omega = +1`` (the mirror experiment is a symmetry mapping, not a second
code path).  Each arrival consumes exactly four uniform draws from its
run's stream -- (bot test, private signal, feed draw, share draw) -- so
trajectories are reproducible independently of branch structure, chunking,
or batching.

Per-run streams come from counter-based Philox generators keyed by
``base_seed XOR run_index``, which makes ensemble results independent of
any parallel schedule.

The hot loop is a single scalar kernel compiled with numba when
available; without numba the same function runs as pure Python
(identical arithmetic, much slower).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .params import ModelParams
from .strategy import Strategy

try:  # pragma: no cover - exercised implicitly by every simulation test
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


DEFAULT_CLASSIFY_RADIUS = 0.08
# Per-chunk uniform-buffer budget (bytes); keeps peak memory modest even
# for very large ensembles.
_CHUNK_BYTES = 256 * 2**20
_RUN_BATCH = 20_000


class SequencingError(RuntimeError):
    """Raised when an operation requires a feed that does not exist yet."""


# ---------------------------------------------------------------------------
# Platform state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlatformState:
    """Sufficient statistic of the platform after ``t`` arrivals.

    Counts and scores are split by story realization relative to the true
    state ``omega = +1``: "pos" stories are correct, "neg" incorrect.
    """

    count_pos: int = 0
    count_neg: int = 0
    score_pos: int = 0
    score_neg: int = 0
    t: int = 0
    bots: int = 0

    @property
    def x(self) -> float:
        """Viral accuracy: correct share of total popularity."""
        total = self.score_pos + self.score_neg
        return self.score_pos / total if total else 0.5

    @property
    def z(self) -> float:
        """Correct fraction of posted stories."""
        total = self.count_pos + self.count_neg
        return self.count_pos / total if total else 0.5

    def check_invariants(self, params: ModelParams) -> None:
        K, C = params.K, params.C
        assert self.score_pos >= self.count_pos >= 0
        assert self.score_neg >= self.count_neg >= 0
        assert 0 <= self.bots <= max(0, self.t - K)
        assert self.count_pos + self.count_neg == min(self.t, K) + max(
            0, self.t - K - self.bots
        )
        if self.t >= K and (self.bots == 0 or self.count_neg > 0):
            # Bots only add score when an incorrect story exists to boost,
            # so the score total is exact unless a bot arrived on an
            # all-correct platform.
            assert self.score_pos + self.score_neg <= min(self.t, K) + max(
                0, self.t - K
            ) * (C + 1)
        if self.bots == 0:
            assert self.score_pos + self.score_neg == min(self.t, K) + max(
                0, self.t - K
            ) * (C + 1)


# ---------------------------------------------------------------------------
# Scalar kernel (numba-compiled when available)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _binomial_inversion(K: int, theta: float, u: float) -> int:
    """Smallest k with u < P[Binom(K, theta) <= k], via the pmf recurrence."""
    if theta <= 0.0:
        return 0
    if theta >= 1.0:
        return K
    ratio = theta / (1.0 - theta)
    pmf = (1.0 - theta) ** K
    acc = pmf
    k = 0
    while u >= acc and k < K:
        k += 1
        pmf *= ratio * (K - k + 1) / k
        acc += pmf
    return k


@njit(cache=True)
def _step(state, cdf, q, K, C, lam, iota, u_bot, u_sig, u_feed, u_z):
    """Advance one arrival in place; returns the observation code or -1.

    ``state`` is a 5-vector (count_pos, count_neg, score_pos, score_neg,
    bots) of float64 counters; the observation code is
    ``s_idx * (K + 1) + k`` for a normal post-seeding arrival, -1 for
    seeding arrivals and bots.
    """
    t = state[0] + state[1] + state[4]  # arrivals so far (counts + bots)
    if t < K:
        if u_sig < q:
            state[0] += 1.0
            state[2] += 1.0
        else:
            state[1] += 1.0
            state[3] += 1.0
        return -1
    if u_bot < iota:
        if state[1] > 0.0:
            state[3] += C + 1.0
        state[4] += 1.0
        return -1
    s_idx = 1 if u_sig < q else 0
    x = state[2] / (state[2] + state[3])
    zc = state[0] / (state[0] + state[1])
    theta = lam * x + (1.0 - lam) * zc
    k = _binomial_inversion(K, theta, u_feed)
    z = 0
    while u_z >= cdf[s_idx, k, z] and z < C:
        z += 1
    state[2] += z
    state[3] += C - z
    if s_idx == 1:
        state[0] += 1.0
        state[2] += 1.0
    else:
        state[1] += 1.0
        state[3] += 1.0
    return s_idx * (K + 1) + k


@njit(cache=True)
def _sim_chunk(u, t0, states, cdf, q, K, C, lam, iota,
               snap_ts, snap_x, snap_z, obs, collect_obs, obs_from):
    """Consume a block of pregenerated uniforms for a batch of runs.

    ``u`` has shape (runs, steps, 4); ``states`` is (runs, 5).  Snapshots
    are recorded into ``snap_x``/``snap_z`` (n_snap, runs) whenever the
    arrival count reaches an entry of the sorted ``snap_ts`` (restricted
    by the caller to this chunk's range).  Observation counts accumulate
    into ``obs`` (2, K+1) over all non-bot arrivals with t >= K and
    position strictly greater than ``obs_from``.
    """
    m, c, _ = u.shape
    n_snap = snap_ts.shape[0]
    for i in range(m):
        st = states[i]
        p = 0
        for j in range(c):
            code = _step(st, cdf, q, K, C, lam, iota,
                         u[i, j, 0], u[i, j, 1], u[i, j, 2], u[i, j, 3])
            if collect_obs and code >= 0 and t0 + j + 1 > obs_from:
                obs[code // (K + 1), code % (K + 1)] += 1
            if p < n_snap and t0 + j + 1 == snap_ts[p]:
                snap_x[p, i] = st[2] / (st[2] + st[3])
                snap_z[p, i] = st[0] / (st[0] + st[1])
                p += 1


# ---------------------------------------------------------------------------
# Scalar public operations
# ---------------------------------------------------------------------------

def sample_feed_count(state: PlatformState, params: ModelParams,
                      rng: np.random.Generator) -> int:
    """Draw the number of positive stories in a K-story feed.

    With-replacement slot sampling reduces to a single Binomial(K, theta)
    draw with theta = lam * x + (1 - lam) * z.
    """
    if state.t < params.K:
        raise SequencingError(f"no feed exists yet at t={state.t} < K={params.K}")
    theta = params.lam * state.x + (1.0 - params.lam) * state.z
    return int(_binomial_inversion(params.K, theta, float(rng.random())))


def advance_one_agent(state: PlatformState, sigma: Strategy,
                      params: ModelParams, rng: np.random.Generator) -> PlatformState:
    """Process one arrival and return the new state.

    Always consumes exactly four uniforms, matching the batch kernel
    draw-for-draw, so a scalar replay of a run is bit-identical to the
    kernel's trajectory.
    """
    u = rng.random(4)
    vec = np.array([state.count_pos, state.count_neg, state.score_pos,
                    state.score_neg, state.bots], dtype=np.float64)
    _step(vec, sigma.cdf_table(), params.q, params.K, params.C,
          params.lam, params.iota, u[0], u[1], u[2], u[3])
    return PlatformState(
        count_pos=int(vec[0]), count_neg=int(vec[1]),
        score_pos=int(vec[2]), score_neg=int(vec[3]),
        t=state.t + 1, bots=int(vec[4]),
    )


# ---------------------------------------------------------------------------
# Runs and ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunResult:
    """Outcome of one simulated platform."""

    final_x: float
    final_z: float
    assigned_fixed_point: int | str = "unassigned"
    path_t: np.ndarray | None = field(default=None, repr=False)
    path_x: np.ndarray | None = field(default=None, repr=False)
    path_z: np.ndarray | None = field(default=None, repr=False)
    seed: int = 0


@dataclass(frozen=True)
class EnsembleStats:
    """Monte Carlo estimate of the distribution over limit steady states."""

    runs: int
    fixed_point_locations: np.ndarray
    frequencies: np.ndarray          # per fixed point, same order
    standard_errors: np.ndarray
    unassigned_fraction: float
    mean_final_x: float
    informative_fraction: float      # fraction with sampling accuracy > 1/2
    objective_estimates: dict = field(default_factory=dict)
    final_x: np.ndarray = field(default=None, repr=False)
    final_z: np.ndarray = field(default=None, repr=False)
    assigned: np.ndarray = field(default=None, repr=False)
    snapshots: dict = field(default_factory=dict, repr=False)
    observation_counts: np.ndarray | None = field(default=None, repr=False)
    base_seed: int = 0


def _run_generator(base_seed: int, run_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=base_seed ^ run_index))


def classify_final_x(final_x: np.ndarray, locations: np.ndarray,
                     radius: float = DEFAULT_CLASSIFY_RADIUS) -> np.ndarray:
    """Nearest-fixed-point index per run, or -1 beyond the radius."""
    if len(locations) == 0:
        return np.full(len(final_x), -1, dtype=np.int64)
    dist = np.abs(final_x[:, None] - np.asarray(locations)[None, :])
    idx = np.argmin(dist, axis=1)
    idx[dist[np.arange(len(final_x)), idx] > radius] = -1
    return idx


def log_spaced_ts(n: int, points: int = 200) -> np.ndarray:
    """Logarithmically spaced arrival counts in [1, n], deduplicated."""
    ts = np.unique(np.geomspace(1, n, points).round().astype(np.int64))
    return ts


def _simulate_batch(sigma, params, run_indices, base_seed, snap_ts,
                    collect_obs, obs_from=0):
    """Simulate a batch of runs to the horizon; returns snapshot arrays.

    Streams uniforms chunkwise so memory stays bounded regardless of the
    horizon; state carries over between chunks.
    """
    m = len(run_indices)
    n = params.n
    cdf = np.ascontiguousarray(sigma.cdf_table())
    states = np.zeros((m, 5), dtype=np.float64)
    snap_ts = np.asarray(sorted(snap_ts), dtype=np.int64)
    snap_x = np.empty((len(snap_ts), m))
    snap_z = np.empty((len(snap_ts), m))
    obs = np.zeros((2, params.K + 1), dtype=np.int64)
    gens = [_run_generator(base_seed, int(r)) for r in run_indices]
    chunk = max(1, _CHUNK_BYTES // (m * 32))
    t0 = 0
    while t0 < n:
        c = min(chunk, n - t0)
        u = np.empty((m, c, 4))
        for i, g in enumerate(gens):
            g.random(out=u[i])
        lo = np.searchsorted(snap_ts, t0, side="right")
        hi = np.searchsorted(snap_ts, t0 + c, side="right")
        _sim_chunk(u, t0, states, cdf, params.q, params.K, params.C,
                   params.lam, params.iota, snap_ts[lo:hi],
                   snap_x[lo:hi], snap_z[lo:hi], obs, collect_obs,
                   obs_from)
        t0 += c
    final_x = states[:, 2] / (states[:, 2] + states[:, 3])
    final_z = states[:, 0] / (states[:, 0] + states[:, 1])
    return final_x, final_z, snap_ts, snap_x, snap_z, obs


def run_trajectory(sigma: Strategy, params: ModelParams, seed: int,
                   fixed_points=None, radius: float = DEFAULT_CLASSIFY_RADIUS,
                   path_points: int = 200) -> RunResult:
    """Simulate one platform for n arrivals; deterministic given the seed.

    Records x and z along a logarithmically spaced path and classifies the
    final viral accuracy against ``fixed_points`` (a list of
    FixedPointReport or of locations) by nearest fixed point within
    ``radius``.
    """
    ts = log_spaced_ts(params.n, path_points)
    fx, fz, snap_ts, snap_x, snap_z, _ = _simulate_batch(
        sigma, params, [0], seed, ts, False)
    locs = _fp_locations(fixed_points)
    assigned = classify_final_x(fx, locs, radius)[0]
    return RunResult(
        final_x=float(fx[0]), final_z=float(fz[0]),
        assigned_fixed_point=int(assigned) if assigned >= 0 else "unassigned",
        path_t=snap_ts, path_x=snap_x[:, 0].copy(), path_z=snap_z[:, 0].copy(),
        seed=seed,
    )


def _fp_locations(fixed_points) -> np.ndarray:
    if fixed_points is None:
        return np.empty(0)
    locs = []
    for fp in fixed_points:
        locs.append(getattr(fp, "x_star", fp))
    return np.asarray(locs, dtype=float)


def run_ensemble(sigma: Strategy, params: ModelParams, m_runs: int,
                 base_seed: int, objectives: dict | None = None,
                 fixed_points=None, radius: float = DEFAULT_CLASSIFY_RADIUS,
                 snapshot_ts=(), collect_observations: bool = False,
                 observe_from: int = 0,
                 run_batch: int = _RUN_BATCH) -> EnsembleStats:
    """Independent trajectories with per-run seed = base_seed XOR run index.

    Aggregates per-fixed-point frequencies (binomial standard errors),
    objective averages E[f(x(n))], optional state snapshots at the given
    arrival counts, and optional pooled observation counts (used for
    empirical posterior estimation).  Observations are pooled over all
    positions K+1..n by default; ``observe_from`` discards positions at
    or below the given arrival count, which restricts the pool to the
    late, near-steady-state part of each run.
    """
    if m_runs < 1:
        raise ValueError("m_runs must be >= 1")
    finals_x, finals_z = [], []
    snaps_x, snaps_z = [], []
    obs_total = np.zeros((2, params.K + 1), dtype=np.int64)
    snap_ts_sorted = None
    for start in range(0, m_runs, run_batch):
        idx = range(start, min(start + run_batch, m_runs))
        fx, fz, sts, sx, sz, obs = _simulate_batch(
            sigma, params, idx, base_seed, snapshot_ts, collect_observations,
            observe_from)
        finals_x.append(fx)
        finals_z.append(fz)
        snaps_x.append(sx)
        snaps_z.append(sz)
        obs_total += obs
        snap_ts_sorted = sts
    final_x = np.concatenate(finals_x)
    final_z = np.concatenate(finals_z)
    snapshots = {}
    if len(snap_ts_sorted):
        sx = np.concatenate(snaps_x, axis=1)
        sz = np.concatenate(snaps_z, axis=1)
        snapshots = {int(t): (sx[i], sz[i]) for i, t in enumerate(snap_ts_sorted)}

    locs = _fp_locations(fixed_points)
    assigned = classify_final_x(final_x, locs, radius)
    freqs = np.array([(assigned == j).mean() for j in range(len(locs))])
    ses = np.sqrt(freqs * (1 - freqs) / m_runs)
    sampling_acc = params.lam * final_x + (1 - params.lam) * params.q
    objective_estimates = {}
    for name, f in (objectives or {}).items():
        vals = f(final_x)
        objective_estimates[name] = (
            float(np.mean(vals)),
            float(np.std(vals, ddof=1) / math.sqrt(m_runs)) if m_runs > 1 else 0.0,
        )
    return EnsembleStats(
        runs=m_runs,
        fixed_point_locations=locs,
        frequencies=freqs,
        standard_errors=ses,
        unassigned_fraction=float((assigned == -1).mean()),
        mean_final_x=float(final_x.mean()),
        informative_fraction=float((sampling_acc > 0.5).mean()),
        objective_estimates=objective_estimates,
        final_x=final_x,
        final_z=final_z,
        assigned=assigned,
        snapshots=snapshots,
        observation_counts=obs_total if collect_observations else None,
        base_seed=base_seed,
    )
