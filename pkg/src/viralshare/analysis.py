"""Fixed points, stability, critical virality weight, and robustness bound.

The long-run behavior of viral accuracy is governed by the roots of
``g(x) = (1 - iota) * phi_sigma(x) - x`` on [0, 1]: crossings from above
are stable steady states, crossings from below are unstable, and
tangencies ("touchpoints") are stable from exactly one side yet still
reached with positive probability.

``g`` is a polynomial of degree at most K in x, so a dense grid plus
bisection resolves every root in practice; a Sturm-sequence count over
exact rationals is available as a certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar

from .inflow import inflow_accuracy, inflow_accuracy_majority
from .params import ModelParams, ParameterError
from .strategy import Strategy, majority_rule

ROOT_TOL = 1e-10
TOUCH_TOL = 1e-7
CLASSIFY_EPS = 1e-6
ISOLATION_GAP = 1e-5
BOUNDARY_TOL = 1e-9
GRID_POINTS = 4096

STABILITIES = ("stable_both", "touch_left_stable", "touch_right_stable",
               "unstable")
LABELS = ("strictly_informative", "informative_boundary",
          "strictly_misleading", "misleading_boundary")


class RootIsolationError(RuntimeError):
    """Raised when roots cannot be separated at the configured resolution."""


@dataclass(frozen=True)
class FixedPointReport:
    """One fixed point of (1-iota)*phi, classified."""

    x_star: float
    residual: float
    stability: str
    label: str

    @property
    def is_steady_state(self) -> bool:
        """Doubly unstable fixed points are never reached; all others are."""
        return self.stability != "unstable"


@dataclass(frozen=True)
class CriticalWeightResult:
    """Smallest virality weight admitting a misleading steady state."""

    lambda_star: float            # math.inf when none exists up to lam = 1
    bracket_width: float
    witness_x: float | None       # first fixed point in [0, 1/2] at lam*

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lambda_star)


def _label_for(x_star: float, params: ModelParams) -> str:
    acc = params.lam * x_star + (1.0 - params.lam) * params.q
    if abs(acc - 0.5) <= BOUNDARY_TOL:
        # The weak inequalities of the definition overlap at exactly 1/2;
        # report the boundary side by the sign convention of x itself.
        return ("informative_boundary" if x_star >= 0.5
                else "misleading_boundary")
    return "strictly_informative" if acc > 0.5 else "strictly_misleading"


def _bisect_root(g, lo, hi, tol=ROOT_TOL):
    glo = g(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return mid
        gm = g(mid)
        if gm == 0.0:
            return mid
        if (glo > 0) == (gm > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fixed_points(sigma: Strategy, params: ModelParams,
                 iota: float | None = None,
                 grid_points: int = GRID_POINTS) -> list[FixedPointReport]:
    """All roots of (1-iota)*phi_sigma(x) - x on [0, 1], classified.

    Sign changes on a uniform grid are refined by bisection to 1e-10;
    tangencies are detected as local minima of |g| below 1e-7 without a
    sign change and refined by minimizing g**2.  Raises
    RootIsolationError when two roots fall within the isolation gap.
    """
    if iota is None:
        iota = params.iota

    def g(x):
        return inflow_accuracy(sigma, params, x, iota=iota) - x

    xs = np.linspace(0.0, 1.0, grid_points)
    gs = inflow_accuracy(sigma, params, xs, iota=iota) - xs
    roots: list[float] = []
    sign = np.sign(gs)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    for i in flips:
        roots.append(_bisect_root(g, xs[i], xs[i + 1]))
    for i in np.nonzero(sign == 0)[0]:
        roots.append(float(xs[i]))
    # Tangencies: interior local minima of |g| that nearly vanish but do
    # not change sign on the grid.
    ags = np.abs(gs)
    for i in range(1, grid_points - 1):
        if ags[i] <= ags[i - 1] and ags[i] <= ags[i + 1] and ags[i] < TOUCH_TOL:
            if sign[i - 1] == sign[i + 1] and sign[i] != 0:
                res = minimize_scalar(lambda x: g(x) ** 2,
                                      bounds=(xs[i - 1], xs[i + 1]),
                                      method="bounded",
                                      options={"xatol": ROOT_TOL * 1e-2})
                if abs(g(res.x)) < TOUCH_TOL:
                    roots.append(float(res.x))
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if merged and abs(r - merged[-1]) < ISOLATION_GAP:
            if abs(g(r)) > TOUCH_TOL and abs(g(merged[-1])) > TOUCH_TOL:
                raise RootIsolationError(
                    f"two roots within {ISOLATION_GAP} near x={r:.6f}; "
                    f"increase grid_points={grid_points}"
                )
            continue
        merged.append(r)
    if not merged:
        raise RootIsolationError(
            "no fixed point found; phi(0) > 0 and phi(1) < 1 guarantee one"
        )
    reports = []
    for r in merged:
        left = g(max(0.0, r - CLASSIFY_EPS))
        right = g(min(1.0, r + CLASSIFY_EPS))
        if r <= CLASSIFY_EPS:
            left = 1.0   # g(0) = (1-iota)*phi(0) > 0
        if r >= 1.0 - CLASSIFY_EPS:
            right = -1.0
        if left > 0 and right < 0:
            stability = "stable_both"
        elif left < 0 and right > 0:
            stability = "unstable"
        elif left < 0 and right < 0:
            stability = "touch_right_stable"
        else:
            stability = "touch_left_stable"
        reports.append(FixedPointReport(
            x_star=r, residual=abs(g(r)), stability=stability,
            label=_label_for(r, params),
        ))
    return reports


# ---------------------------------------------------------------------------
# Critical virality weight
# ---------------------------------------------------------------------------

def _min_gap_majority(params: ModelParams, hi: float = 0.5):
    """min over [0, hi] of phi_maj(x) - x, with its argmin."""
    xs = np.linspace(0.0, hi, 2049)
    gs = inflow_accuracy_majority(params, xs) - xs
    i = int(np.argmin(gs))
    lo, up = xs[max(0, i - 1)], xs[min(len(xs) - 1, i + 1)]
    res = minimize_scalar(
        lambda x: inflow_accuracy_majority(params, x) - x,
        bounds=(lo, up), method="bounded", options={"xatol": 1e-12})
    if res.fun < gs[i]:
        return float(res.fun), float(res.x)
    return float(gs[i]), float(xs[i])


def critical_virality(q: float, K: int, C: int, tol: float = 1e-10,
                      check_monotone: bool = True) -> CriticalWeightResult:
    """Bisect for the smallest lam with a majority fixed point in [0, 1/2].

    The predicate "min over [0, 1/2] of phi - x <= 0" is monotone in lam
    (a misleading fixed point persists for every larger lam); this is
    spot-checked at 8 intermediate weights rather than assumed.  Returns
    an infinite sentinel when even lam = 1 admits no misleading fixed
    point.  The lower bracket endpoint is the structural bound
    1 - 1/(2q), below which the feasible region is empty.
    """
    base = ModelParams(q=q, K=K, C=C, lam=0.0)

    def predicate(lam: float) -> bool:
        gap, _ = _min_gap_majority(base.with_(lam=lam))
        return gap <= 0.0

    lo = 1.0 - 1.0 / (2.0 * q) + 1e-9
    if not predicate(1.0):
        return CriticalWeightResult(math.inf, 0.0, None)
    hi = 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    if check_monotone:
        for lam in np.linspace(hi, 1.0, 10)[1:-1]:
            if not predicate(float(lam)):
                raise RootIsolationError(
                    f"misleading-fixed-point predicate not monotone at lam={lam}"
                )
    _, witness = _min_gap_majority(base.with_(lam=hi))
    return CriticalWeightResult(lambda_star=hi, bracket_width=hi - lo,
                                witness_x=witness)


def comparative_statics_table(grid) -> list[dict]:
    """lam* over a (q, K, C) grid, with directional and bound flags.

    Each entry records lam*, the structural lower bound 1 - 1/(2q), and
    a ``bound_ok`` flag.  For every pair of grid points differing in a
    single coordinate, the monotonicity direction (lam* increasing in q,
    increasing as C decreases, K -> K-2 weakly increasing, odd K to
    K +/- 1 weakly increasing) is checked and violations are flagged on
    both entries -- never dropped.
    """
    entries = []
    for (q, K, C) in grid:
        r = critical_virality(q, K, C)
        entries.append({
            "q": q, "K": K, "C": C,
            "lambda_star": r.lambda_star,
            "bound": 1.0 - 1.0 / (2.0 * q),
            "bound_ok": (not r.finite) or r.lambda_star > 1.0 - 1.0 / (2.0 * q),
            "violations": [],
        })
    slack = 1e-8  # bisection noise allowance on equality comparisons

    def flag(a, b, msg):
        a["violations"].append(msg)
        b["violations"].append(msg)

    for a in entries:
        for b in entries:
            la, lb = a["lambda_star"], b["lambda_star"]
            if a["K"] == b["K"] and a["C"] == b["C"] and b["q"] > a["q"]:
                # Weakly increasing in q, strictly so while finite.
                strict = math.isfinite(la) and math.isfinite(lb)
                if (strict and lb <= la + slack) or lb < la - slack:
                    flag(a, b, f"q up {a['q']}->{b['q']}")
            if a["q"] == b["q"] and a["K"] == b["K"] and b["C"] < a["C"]:
                if lb < la - slack:
                    flag(a, b, f"C down {a['C']}->{b['C']}")
            if a["q"] == b["q"] and a["C"] == b["C"]:
                if b["K"] == a["K"] - 2 and lb < la - slack:
                    flag(a, b, f"K down2 {a['K']}->{b['K']}")
                if a["K"] % 2 == 1 and abs(b["K"] - a["K"]) == 1 \
                        and lb < la - slack:
                    flag(a, b, f"K odd-step {a['K']}->{b['K']}")
    return entries


# ---------------------------------------------------------------------------
# Manipulation robustness bound
# ---------------------------------------------------------------------------

def manipulation_bound(params: ModelParams, grid_step: float = 1e-5) -> float:
    """Largest bot rate below which no misleading steady state can exist.

    iota_lower = 1 - max x / phi_maj(x) over the misleading region
    {x : lam*x + (1-lam)*q <= 1/2}.  The maximizer of this rational
    function may sit on the region boundary, so the boundary point is
    compared against the grid + golden-section interior search
    explicitly.  An empty region (lam <= 1 - 1/(2q)) returns 1.
    """
    lam, q = params.lam, params.q
    if lam <= 0.0:
        return 1.0
    x_max = (0.5 - (1.0 - lam) * q) / lam
    if x_max < 0.0:
        return 1.0
    x_max = min(x_max, 1.0)

    def ratio(x):
        return x / inflow_accuracy_majority(params, x)

    xs = np.arange(0.0, x_max, grid_step)
    vals = ratio(xs) if len(xs) else np.array([0.0])
    i = int(np.argmax(vals))
    lo = xs[max(0, i - 1)] if len(xs) else 0.0
    hi = min(x_max, (xs[i] + grid_step) if len(xs) else x_max)
    res = minimize_scalar(lambda x: -ratio(x), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-10})
    best = max(float(-res.fun), float(vals[i]), float(ratio(x_max)))
    return 1.0 - best


# ---------------------------------------------------------------------------
# Exact certification (Sturm sequences over rationals)
# ---------------------------------------------------------------------------

def count_roots_certified(sigma: Strategy, params: ModelParams,
                          iota: float = 0.0,
                          interval: tuple[float, float] = (0.0, 1.0)) -> int:
    """Count distinct real roots of (1-iota)*phi - x on an interval exactly.

    Builds the degree-<=K polynomial over exact rationals (every float
    input is a dyadic rational) and applies Sturm's theorem via sympy.
    Slow; intended as a certificate when grid-based isolation is in doubt.
    """
    import sympy

    x = sympy.Symbol("x")
    q = Fraction(params.q)
    lam = Fraction(params.lam)
    io = Fraction(iota)
    theta = lam * sympy.Rational(1) * x + (1 - lam) * q
    K, C = params.K, params.C
    e = sigma.expectations()
    poly = sympy.Rational(q.numerator, q.denominator)
    for k in range(K + 1):
        w = q * Fraction(float(e[1][k])) + (1 - q) * Fraction(float(e[0][k]))
        wr = sympy.Rational(w.numerator, w.denominator)
        poly += wr * math.comb(K, k) * theta**k * (1 - theta) ** (K - k)
    g = sympy.Rational((1 - io).numerator, (1 - io).denominator) * poly \
        / (1 + C) - x
    g = sympy.Poly(sympy.expand(g), x, domain="QQ")
    a = sympy.Rational(Fraction(interval[0]).numerator,
                       Fraction(interval[0]).denominator)
    b = sympy.Rational(Fraction(interval[1]).numerator,
                       Fraction(interval[1]).denominator)
    return sympy.polys.polytools.count_roots(g, a, b)
