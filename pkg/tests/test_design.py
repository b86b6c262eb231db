import math

import numpy as np
import pytest

from viralshare import ModelParams, ParameterError, majority_rule, contrarian_mix
from viralshare.analysis import critical_virality, fixed_points
from viralshare.design import (OBJECTIVES, EquilibriumUnresolvedError,
                               make_tabulated_objective, optimize_lambda,
                               platform_payoff, resolve_objective,
                               robustness_report)

P41 = ModelParams(q=0.51, K=6, C=3)
P73 = ModelParams(q=0.55, K=7, C=3)


def test_objective_registry_and_tabulated():
    xs = np.array([0.0, 0.25, 0.5, 1.0])
    assert np.allclose(OBJECTIVES["accuracy"](xs), xs)
    assert np.allclose(OBJECTIVES["agreement"](xs), [0.5, 0.25, 0.0, 0.5])
    tab = make_tabulated_objective(np.linspace(0, 1, 1025) ** 2)
    assert tab(0.5) == pytest.approx(0.25, abs=1e-5)
    with pytest.raises(ParameterError):
        make_tabulated_objective([1.0, 2.0])
    with pytest.raises(ParameterError):
        resolve_objective("nope")


def test_limit_payoff_below_lstar():
    lstar = critical_virality(P41.q, P41.K, P41.C, tol=1e-8).lambda_star
    pe = platform_payoff("accuracy", P41.with_(lam=lstar - 1e-4),
                         estimator="limit")
    assert pe.estimate == pytest.approx(0.7586, abs=1e-3)
    assert pe.estimator == "limit" and pe.runs == 0
    # the limit payoff equals f at the unique fixed point
    fp = fixed_points(majority_rule(P41), P41.with_(lam=0.5))[0]
    pe2 = platform_payoff("accuracy", P41.with_(lam=0.5), estimator="limit")
    assert pe2.estimate == pytest.approx(fp.x_star, abs=1e-9)


def test_equilibrium_unresolved_above_lstar():
    with pytest.raises(EquilibriumUnresolvedError):
        platform_payoff("accuracy", P41.with_(lam=1.0), m_runs=10)


def test_supplied_equilibrium_above_lstar():
    params = P41.with_(lam=1.0, n=2000)
    sig = contrarian_mix(params, 0.32)
    pe = platform_payoff("accuracy", params, m_runs=200, base_seed=4,
                         equilibrium=sig)
    assert 0.3 < pe.estimate < 0.7
    assert pe.ci[0] < pe.estimate < pe.ci[1]


def test_optimize_lambda_monotone_below_lstar_limit_estimator():
    grid = [0.0, 0.2, 0.4, 0.6, 0.7]
    report = optimize_lambda("accuracy", P73, grid, estimator="limit")
    ests = [report.estimates[("objective", lam)].estimate for lam in grid]
    assert all(b > a for a, b in zip(ests, ests[1:]))
    assert report.argmax["objective"] == 0.7
    assert isinstance(report.argmax_at_least_lambda_star["objective"], bool)


def test_optimize_lambda_argmax_flag_near_lstar():
    lstar = critical_virality(P73.q, P73.K, P73.C, tol=1e-8).lambda_star
    grid = [0.5, lstar - 1e-3]
    report = optimize_lambda("accuracy", P73, grid, estimator="limit")
    assert report.argmax["objective"] == pytest.approx(lstar - 1e-3)
    assert report.argmax_at_least_lambda_star["objective"]


def test_robustness_report_structure():
    params = P73.with_(lam=0.5, n=3000)
    rep = robustness_report(params, [0.0, 0.05, 0.10, 0.2], m_runs=50,
                            base_seed=3)
    assert rep.iota_lower == pytest.approx(5 / 41, abs=1e-9)
    assert rep.maximizer_on_boundary
    # iota = 0 reduces to the unmanipulated analysis: no misleading state
    assert not rep.misleading_present[0]
    assert not rep.misleading_present[:3].any()   # grid points below bound
    assert rep.misleading_present[3]
    # informative state degrades monotonically while it exists
    xs = rep.informative_x[~np.isnan(rep.informative_x)]
    assert np.all(np.diff(xs) <= 1e-12)
    assert rep.threshold_consistent
    # analytic/simulated agreement at every evaluated iota
    finite = [v for v in rep.cluster_agreement.values() if not math.isnan(v)]
    assert finite and max(finite) < 0.03


def test_robustness_rejects_lam_above_lstar():
    with pytest.raises(ParameterError):
        robustness_report(P73.with_(lam=0.9), [0.0], m_runs=10)
