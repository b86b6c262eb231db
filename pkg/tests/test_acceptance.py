"""Acceptance suite: the headline quantitative targets, end to end.

Each criterion prints exactly one ``CRITERION k: PASS/FAIL`` line on the
real stdout (bypassing pytest's capture, so the lines appear in plain
``pytest -v`` output) and then asserts, so a failing criterion both
prints FAIL and fails the suite.

The simulation-heavy criteria (4, 5, 6) run at desk scale with pinned
seeds and stated tolerances; on a single CPU core they take tens of
minutes.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import beta, ks_2samp

from viralshare import ModelParams, contrarian_mix, majority_rule
from viralshare.analysis import (comparative_statics_table, critical_virality,
                                 fixed_points, manipulation_bound)
from viralshare.design import platform_payoff
from viralshare.engine import run_ensemble
from viralshare.equilibrium import (best_response, default_family,
                                    empirical_posteriors,
                                    solve_mixing_equilibrium)
from viralshare.inflow import (inflow_accuracy, inflow_accuracy_bruteforce,
                               inflow_derivative)

from helpers import random_strategy

P41 = ModelParams(q=0.51, K=6, C=3, lam=1.0, n=20_000)
P73 = ModelParams(q=0.55, K=7, C=3)

# Pinned seeds: chosen once, up front, and never rerolled.
SEED_FIG = 20_260_824
SEED_MIXING = 90_000
SEED_BR = 91_000
SEED_PROPS = 92_000

# Criterion 5 configuration (see tests' docstrings): the mixing
# probability is a large-n limit, so beliefs are pooled over the late
# half of each run; two grid points bracket the target and the run count
# is sized so the interpolated estimate resolves the 0.03 tolerance.
MIXING_GRID = (0.22, 0.42)
MIXING_RUNS = 500_000
MIXING_OBSERVE_FROM = 10_000


def _report(capsys, k: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} — {detail}"
    with capsys.disabled():
        print(line, flush=True)


# -- criterion 1: critical virality weights ---------------------------------

def test_criterion_1_critical_weights(capsys):
    t0 = time.perf_counter()
    l1 = critical_virality(0.55, 7, 3).lambda_star
    dt1 = time.perf_counter() - t0
    t0 = time.perf_counter()
    l2 = critical_virality(0.51, 6, 3).lambda_star
    dt2 = time.perf_counter() - t0
    ok = abs(l1 - 0.76) <= 0.01 and abs(l2 - 0.77) <= 0.01 \
        and dt1 < 1.0 and dt2 < 1.0
    _report(capsys, 1, ok, f"lambda*(0.55,7,3)={l1:.4f} (target 0.76±0.01, "
                   f"{dt1:.2f}s), lambda*(0.51,6,3)={l2:.4f} "
                   f"(target 0.77±0.01, {dt2:.2f}s)")
    assert ok


# -- criterion 2: fixed-point census ----------------------------------------

def test_criterion_2_fixed_point_census(capsys):
    t0 = time.perf_counter()
    reps = {lam: fixed_points(majority_rule(P73), P73.with_(lam=lam))
            for lam in (0.3, 0.6, 0.9)}
    dt = time.perf_counter() - t0
    single = all(
        len(reps[lam]) == 1 and reps[lam][0].label == "strictly_informative"
        for lam in (0.3, 0.6))
    ordered = single and reps[0.6][0].x_star > reps[0.3][0].x_star
    labels9 = sorted(r.label for r in reps[0.9] if r.is_steady_state)
    pair = labels9 == ["strictly_informative", "strictly_misleading"]
    ok = single and ordered and pair and dt < 1.0
    _report(capsys, 2, ok, f"census: lam=0.3 -> {len(reps[0.3])} informative, "
                   f"lam=0.6 -> {len(reps[0.6])} informative, "
                   f"x*(0.6)={reps[0.6][0].x_star:.4f} > "
                   f"x*(0.3)={reps[0.3][0].x_star:.4f}, "
                   f"lam=0.9 steady labels={labels9} ({dt:.2f}s)")
    assert ok


# -- criterion 3: structural-bound and directional sweeps --------------------

def test_criterion_3_statics_sweeps(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(17)
    bound_ok = 0
    finite = 0
    for _ in range(200):
        K = int(rng.integers(2, 21))
        C = int(rng.integers(1, max(2, K // 2 + 1)))
        q = float(rng.uniform(0.5 + 1e-3, 0.999))
        r = critical_virality(q, K, C, tol=1e-6, check_monotone=False)
        if r.finite:
            finite += 1
            bound_ok += r.lambda_star > 1.0 - 1.0 / (2.0 * q)
    grid = [(q, K, C)
            for q in (0.52, 0.56, 0.60, 0.64, 0.68)
            for K in (6, 7, 8, 9, 10)
            for C in (2, 3)]
    assert len(grid) == 50
    entries = comparative_statics_table(grid)
    violations = sum(len(e["violations"]) for e in entries)
    dt = time.perf_counter() - t0
    ok = bound_ok == finite and violations == 0 and dt < 30.0
    _report(capsys, 3, ok, f"structural bound held for {bound_ok}/{finite} finite "
                   f"lambda* among 200 random (q,K,C); directional "
                   f"violations on 50-point grid: {violations} ({dt:.1f}s)")
    assert ok


# -- criteria 4 and 6 share one 20000-run ensemble ---------------------------

@pytest.fixture(scope="module")
def fig_ensemble():
    sigma = contrarian_mix(P41, 0.32)
    steady = [r for r in fixed_points(sigma, P41) if r.is_steady_state]
    stats = run_ensemble(sigma, P41, 20_000, SEED_FIG, fixed_points=steady)
    return steady, stats


def test_criterion_4_ensemble_reproduction(fig_ensemble, capsys):
    steady, stats = fig_ensemble
    info = stats.informative_fraction
    i_inf = int(np.argmax([r.x_star for r in steady]))
    i_mis = int(np.argmin([r.x_star for r in steady]))
    mean_inf = float(stats.final_x[stats.assigned == i_inf].mean())
    mean_mis = float(stats.final_x[stats.assigned == i_mis].mean())
    ok = abs(info - 0.533) <= 0.02 and abs(mean_inf - 0.84) <= 0.02 \
        and abs(mean_mis - 0.18) <= 0.02
    _report(capsys, 4, ok, f"informative frequency {info:.4f} (target 0.533±0.02), "
                   f"cluster means {mean_inf:.4f} (0.84±0.02) / "
                   f"{mean_mis:.4f} (0.18±0.02), m=20000")
    assert ok


def test_criterion_6_design_payoffs(fig_ensemble, capsys):
    _, stats = fig_ensemble
    lstar = critical_virality(P41.q, P41.K, P41.C, tol=1e-8).lambda_star
    acc_limit = platform_payoff(
        "accuracy", P41.with_(lam=lstar - 1e-4), estimator="limit").estimate
    acc_1 = stats.mean_final_x
    agree_1 = float(np.abs(stats.final_x - 0.5).mean())
    ok = abs(acc_limit - 0.76) <= 0.02 and abs(acc_1 - 0.53) <= 0.02 \
        and abs(agree_1 - 0.33) <= 0.02
    _report(capsys, 6, ok, f"accuracy just below lambda*: {acc_limit:.4f} "
                   f"(0.76±0.02); accuracy at lam=1: {acc_1:.4f} "
                   f"(0.53±0.02); agreement at lam=1: {agree_1:.4f} "
                   f"(0.33±0.02)")
    assert ok


# -- criterion 5: equilibrium estimation -------------------------------------

def test_criterion_5_equilibrium_estimation(capsys):
    """Mixing-probability estimate plus best-response self-consistency.

    The target 0.32 is the large-n limit of the mixing probability, so
    the belief gap is evaluated on the late half of each run (positions
    10001..20000), which suppresses the burn-in transient; with all
    positions pooled the finite-n crossing sits near 0.24 instead.

    Known outcome: this criterion reports FAIL.  The configuration was
    fixed before the seeded run (two bracketing grid points, 500k runs
    each, SE(p_hat) ~ 0.015) and produced p_hat = 0.2806, just outside
    the 0.29 tolerance edge.  Independent measurements show the
    estimated crossing rising with the observation-window start (all
    positions: 0.24, window 10k: 0.290 +- 0.014, window 15k: 0.325 +-
    0.03, transient-free steady-state model: 0.44 +- 0.12), so the
    large-n limit is consistent with 0.32 but cannot be pinned at
    +-0.03 from n=20000 data without tuning the window to the target.
    The test is left failing rather than re-tuned.
    """
    sol = solve_mixing_equilibrium(
        default_family(P41), P41, MIXING_GRID, MIXING_RUNS,
        base_seed=SEED_MIXING, observe_from=MIXING_OBSERVE_FROM)
    mix_ok = sol.status == "ok" and sol.p_hat is not None \
        and abs(sol.p_hat - 0.32) <= 0.03

    br_ok = True
    br_detail = []
    for lam in (0.3, 0.6):
        params = P73.with_(lam=lam, n=20_000)
        maj = majority_rule(params)
        table = empirical_posteriors(maj, params, 2000, SEED_BR)
        match = best_response(table, params).matches(maj)
        br_ok = br_ok and match
        br_detail.append(f"lam={lam}: {'self-consistent' if match else 'NO'}")
    ok = mix_ok and br_ok
    gaps = ", ".join(f"gap({p:.2f})={g:+.6f}"
                     for p, g in zip(sol.p_grid, sol.gaps))
    _report(capsys, 5, ok, f"p_hat={sol.p_hat if sol.p_hat is None else round(sol.p_hat, 4)} "
                   f"(target 0.32±0.03; {gaps}; {MIXING_RUNS} runs/point); "
                   f"majority best-response {'; '.join(br_detail)}")
    assert ok


# -- criterion 7: property suites --------------------------------------------

def test_criterion_7_property_suites(fig_ensemble, capsys):
    results = {}

    # (a) brute-force inflow equivalence at 1e-12 over 1000 random cases.
    rng = np.random.default_rng(SEED_PROPS)
    worst = 0.0
    for _ in range(1000):
        K = int(rng.integers(2, 9))
        C = int(rng.integers(1, max(2, K // 2 + 1)))
        params = ModelParams(q=float(rng.uniform(0.51, 0.99)), K=K, C=C,
                             lam=float(rng.uniform(0, 1)),
                             iota=float(rng.uniform(0, 0.5)))
        sig = random_strategy(rng, K, C)
        x = float(rng.uniform(0, 1))
        z = float(rng.uniform(0, 1))
        a = inflow_accuracy(sig, params, x, z=z, iota=params.iota)
        b = inflow_accuracy_bruteforce(sig, params, x, z=z, iota=params.iota)
        worst = max(worst, abs(float(a) - b))
    results["bruteforce<=1e-12"] = worst <= 1e-12

    # (b) analytic derivative vs central finite difference at 1e-6.
    worst_d = 0.0
    for _ in range(200):
        K = int(rng.integers(2, 9))
        C = int(rng.integers(1, max(2, K // 2 + 1)))
        params = ModelParams(q=float(rng.uniform(0.51, 0.99)), K=K, C=C,
                             lam=float(rng.uniform(0, 1)))
        sig = random_strategy(rng, K, C)
        x = float(rng.uniform(0.05, 0.95))
        h = 1e-5
        fd = (inflow_accuracy(sig, params, x + h)
              - inflow_accuracy(sig, params, x - h)) / (2 * h)
        worst_d = max(worst_d, abs(float(inflow_derivative(sig, params, x))
                                   - float(fd)))
    results["derivative<=1e-6"] = worst_d <= 1e-6

    # (c) one-step drift matches the inflow decomposition within 3 SE.
    params = ModelParams(q=0.51, K=6, C=3, lam=1.0, n=2001)
    sig = contrarian_mix(params, 0.32)
    stats = run_ensemble(sig, params, 4000, 21,
                         snapshot_ts=(500, 501, 2000, 2001))
    drift_ok = True
    for t in (500, 2000):
        x0, z0 = stats.snapshots[t]
        x1, _ = stats.snapshots[t + 1]
        T = params.K + (t - params.K) * (params.C + 1)
        pred = (params.C + 1) * (inflow_accuracy(sig, params, x0, z=z0)
                                 - x0) / (T + params.C + 1)
        dev = (x1 - x0) - pred
        for chunk in np.array_split(np.argsort(x0), 8):
            if len(chunk) < 500:
                continue
            se = dev[chunk].std(ddof=1) / math.sqrt(len(chunk))
            drift_ok = drift_ok and abs(dev[chunk].mean()) <= 3 * se
    results["drift<=3SE"] = drift_ok

    # (d) engine symmetry: with near-fair signals and a state-symmetric
    # strategy the final-x law is symmetric about 1/2 (KS <= 0.02).
    params = ModelParams(q=0.500001, K=6, C=3, lam=1.0, n=3000)
    sym = run_ensemble(majority_rule(params), params, 20_000, 55)
    ks = ks_2samp(sym.final_x, 1.0 - sym.final_x).statistic
    results["symmetry KS<=0.02"] = ks <= 0.02

    # (e) touchpoint reached with positive probability at lambda*:
    # 99% Clopper-Pearson lower bound on the near-touchpoint frequency
    # excludes zero at m=10000.
    lstar = critical_virality(0.55, 7, 3, tol=1e-10)
    params = ModelParams(q=0.55, K=7, C=3, lam=lstar.lambda_star, n=20_000)
    tp = run_ensemble(majority_rule(params), params, 10_000, 3)
    hits = int((np.abs(tp.final_x - lstar.witness_x) < 0.05).sum())
    lower = beta.ppf(0.005, hits, 10_000 - hits + 1) if hits else 0.0
    results[f"touchpoint hits={hits}, CP99 lower>0"] = lower > 0.0

    # (f) manipulation: no misleading fixed point anywhere below the
    # analytic bound, on a 100-point iota grid.
    params = P73.with_(lam=0.5)
    bound = manipulation_bound(params)
    maj = majority_rule(params)
    clean = all(
        not any("misleading" in r.label
                for r in fixed_points(maj, params, iota=float(i)))
        for i in np.linspace(0.0, bound - 1e-6, 100))
    results["iota grid clean"] = clean

    # (g) ensemble/analytic cluster agreement within 0.03 on the shared
    # 20000-run ensemble.
    steady, stats = fig_ensemble
    agree = all(
        abs(float(stats.final_x[stats.assigned == j].mean()) - r.x_star)
        < 0.03
        for j, r in enumerate(steady) if (stats.assigned == j).any())
    results["cluster agreement<0.03"] = agree

    ok = all(results.values())
    detail = ", ".join(f"{name}: {'ok' if good else 'FAIL'}"
                       for name, good in results.items())
    _report(capsys, 7, ok, detail)
    assert ok
