"""Platform design: objective evaluation, virality-weight choice, robustness.

The platform picks the virality weight ``lam`` to maximize
``Pi_n(f, lam) = E[f(x(n))]`` for an objective ``f`` of final viral
accuracy -- engagement-like objectives (``agreement``) reward
polarization, accuracy-like ones reward learning.  Below the critical
virality weight the majority rule is the unique equilibrium; above it an
equilibrium must be supplied (for example a solved mixing family), and
the design layer refuses to assume one silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import critical_virality, fixed_points, manipulation_bound
from .engine import run_ensemble
from .params import ModelParams, ParameterError
from .strategy import Strategy, majority_rule

OBJECTIVES = {
    "accuracy": lambda x: np.asarray(x, dtype=float),
    "agreement": lambda x: np.abs(np.asarray(x, dtype=float) - 0.5),
}


class EquilibriumUnresolvedError(RuntimeError):
    """Raised when lam >= lam* and no equilibrium strategy was supplied."""


def make_tabulated_objective(values):
    """A user objective given as 1025 equally spaced values on [0, 1],
    evaluated by linear interpolation."""
    values = np.asarray(values, dtype=float)
    if values.shape != (1025,):
        raise ParameterError(f"tabulated objective needs 1025 values, got "
                             f"{values.shape}")
    grid = np.linspace(0.0, 1.0, 1025)
    return lambda x: np.interp(np.asarray(x, dtype=float), grid, values)


def resolve_objective(f):
    if callable(f):
        return f
    if f in OBJECTIVES:
        return OBJECTIVES[f]
    raise ParameterError(f"unknown objective {f!r}; registered: "
                         f"{sorted(OBJECTIVES)}")


def _equilibrium_strategy(params: ModelParams, equilibrium,
                          lambda_star: float) -> Strategy:
    if isinstance(equilibrium, Strategy):
        return equilibrium
    if equilibrium in (None, "auto"):
        if params.lam < lambda_star:
            return majority_rule(params)
        raise EquilibriumUnresolvedError(
            f"lam={params.lam} >= lam*={lambda_star:.4f}: the majority rule "
            "is no longer an equilibrium; supply one (e.g. a solved mixing "
            "strategy)"
        )
    raise ParameterError(f"bad equilibrium source {equilibrium!r}")


@dataclass(frozen=True)
class PayoffEstimate:
    estimate: float
    ci: tuple[float, float]
    runs: int
    estimator: str               # "ensemble" or "limit"
    strategy_name: str


def platform_payoff(f, params: ModelParams, m_runs: int = 10_000,
                    base_seed: int = 0, equilibrium=None,
                    estimator: str = "ensemble",
                    lambda_star: float | None = None) -> PayoffEstimate:
    """Estimate Pi_n(f, lam) under the equilibrium strategy for this lam.

    ``estimator="ensemble"`` runs Monte Carlo at horizon n.
    ``estimator="limit"`` evaluates f at the analytic limit: below lam*
    the process converges to the unique informative fixed point x*, so
    the n -> infinity payoff is exactly f(x*) (finite-n ensembles near
    lam* are metastable and approach this value only slowly).
    """
    fobj = resolve_objective(f)
    if lambda_star is None:
        lambda_star = critical_virality(params.q, params.K, params.C,
                                        tol=1e-6).lambda_star
    sigma = _equilibrium_strategy(params, equilibrium, lambda_star)
    if estimator == "limit":
        fps = [r for r in fixed_points(sigma, params) if r.is_steady_state]
        if len(fps) != 1:
            raise EquilibriumUnresolvedError(
                f"limit estimator needs a unique steady state, found "
                f"{len(fps)} at lam={params.lam}"
            )
        val = float(fobj(np.array([fps[0].x_star]))[0])
        return PayoffEstimate(val, (val, val), 0, "limit", sigma.name)
    if estimator != "ensemble":
        raise ParameterError(f"unknown estimator {estimator!r}")
    stats = run_ensemble(sigma, params, m_runs, base_seed,
                         objectives={"f": fobj})
    est, se = stats.objective_estimates["f"]
    return PayoffEstimate(est, (est - 1.96 * se, est + 1.96 * se),
                          m_runs, "ensemble", sigma.name)


@dataclass(frozen=True)
class DesignReport:
    """Pi estimates over a lam grid for one or more objectives."""

    lambda_grid: np.ndarray
    lambda_star: float
    estimates: dict              # (objective, lam) -> PayoffEstimate
    argmax: dict                 # objective -> lam
    argmax_at_least_lambda_star: dict  # objective -> bool (within grid step)


def optimize_lambda(objectives, params: ModelParams, lambda_grid,
                    m_runs: int = 10_000, base_seed: int = 0,
                    equilibria: dict | None = None,
                    estimator: str = "ensemble") -> DesignReport:
    """Evaluate Pi over a lam grid and locate the grid argmax.

    ``equilibria`` maps lam values above lam* to supplied strategies.
    The report flags, per objective, whether the argmax reaches
    lam* - (grid step) -- the structural prediction for objectives that
    are increasing in viral accuracy.
    """
    if isinstance(objectives, (str,)) or callable(objectives):
        objectives = {"objective": objectives}
    lambda_grid = np.asarray(sorted(lambda_grid), dtype=float)
    lstar = critical_virality(params.q, params.K, params.C,
                              tol=1e-6).lambda_star
    estimates, argmax, flags = {}, {}, {}
    for name, f in objectives.items():
        for i, lam in enumerate(lambda_grid):
            pl = params.with_(lam=float(lam))
            eq = (equilibria or {}).get(float(lam))
            estimates[(name, float(lam))] = platform_payoff(
                f, pl, m_runs, base_seed + i, equilibrium=eq,
                estimator=estimator, lambda_star=lstar)
        best = max(lambda_grid,
                   key=lambda lam: estimates[(name, float(lam))].estimate)
        argmax[name] = float(best)
        step = float(np.min(np.diff(lambda_grid))) if len(lambda_grid) > 1 else 0.0
        flags[name] = bool(best >= min(lstar, 1.0) - step)
    return DesignReport(lambda_grid=lambda_grid, lambda_star=lstar,
                        estimates=estimates, argmax=argmax,
                        argmax_at_least_lambda_star=flags)


@dataclass(frozen=True)
class RobustnessReport:
    """Manipulation sweep below lam*: analytic bound vs observed behavior."""

    iota_lower: float            # analytic threshold
    maximizer_on_boundary: bool  # x/phi maximizer sits on the region edge
    iota_grid: np.ndarray
    misleading_present: np.ndarray      # bool per iota (analytic)
    informative_x: np.ndarray           # x*(iota) of the informative state
    cluster_agreement: dict             # iota -> max |ensemble cluster - x*|
    threshold_consistent: bool   # misleading appears just above iota_lower


def robustness_report(params: ModelParams, iota_grid, m_runs: int = 200,
                      base_seed: int = 0,
                      simulate: bool = True) -> RobustnessReport:
    """Sweep bot rates below lam* and compare against the analytic bound.

    For each iota: fixed points of (1-iota)*phi (majority rule), presence
    of misleading states, degradation of the informative state, and --
    when ``simulate`` -- agreement between bot-injected ensemble clusters
    and the analytic fixed points.
    """
    lstar = critical_virality(params.q, params.K, params.C,
                              tol=1e-6).lambda_star
    if params.lam >= lstar:
        raise ParameterError(
            f"robustness guarantee applies below lam*; lam={params.lam} >= "
            f"{lstar:.4f}"
        )
    iota_lb = manipulation_bound(params)
    # Boundary-vs-interior diagnosis of the x/phi maximizer.
    lam, q = params.lam, params.q
    on_boundary = False
    if lam > 0:
        x_max = min(max((0.5 - (1 - lam) * q) / lam, 0.0), 1.0)
        if x_max > 0:
            from .inflow import inflow_accuracy_majority

            xs = np.linspace(0.0, x_max, 20001)
            ratio = xs / np.maximum(inflow_accuracy_majority(params, xs), 1e-300)
            on_boundary = int(np.argmax(ratio)) == len(xs) - 1
    sigma = majority_rule(params)
    iota_grid = np.asarray(sorted(iota_grid), dtype=float)
    misleading = np.zeros(len(iota_grid), dtype=bool)
    informative_x = np.full(len(iota_grid), np.nan)
    agreement = {}
    for i, iota in enumerate(iota_grid):
        fps = fixed_points(sigma, params, iota=float(iota))
        steady = [r for r in fps if r.is_steady_state]
        misleading[i] = any("misleading" in r.label for r in steady)
        info = [r for r in steady if r.label.startswith("strictly_info")]
        if info:
            informative_x[i] = max(r.x_star for r in info)
        if simulate:
            stats = run_ensemble(sigma, params.with_(iota=float(iota)),
                                 m_runs, base_seed + i, fixed_points=steady)
            devs = [abs(stats.final_x[stats.assigned == j].mean() - r.x_star)
                    for j, r in enumerate(steady)
                    if np.any(stats.assigned == j)]
            agreement[float(iota)] = max(devs) if devs else math.nan
    # Does a misleading state appear once iota crosses the bound?
    eps = 1e-3
    above = [r for r in fixed_points(sigma, params,
                                     iota=min(iota_lb + eps, 0.999))
             if r.is_steady_state]
    threshold_consistent = (iota_lb >= 1.0 or
                            any("misleading" in r.label for r in above))
    return RobustnessReport(
        iota_lower=iota_lb, maximizer_on_boundary=on_boundary,
        iota_grid=iota_grid, misleading_present=misleading,
        informative_x=informative_x, cluster_agreement=agreement,
        threshold_consistent=threshold_consistent,
    )
