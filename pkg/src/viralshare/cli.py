"""Batch command-line front end.

Subcommands map one-to-one onto the library layers: ``analyze`` /
``lambda-star`` / ``statics`` (analytic), ``simulate`` (Monte Carlo),
``equilibrium`` (posteriors, mixing solve, p_n curve), ``design`` and
``robustness`` (platform choices).  Every artifact embeds the fully
resolved configuration and seed, so re-running with the same inputs
reproduces the file byte for byte.

Exit codes: 0 success, 2 validation/configuration error, 3 numerical
resolution failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, design, equilibrium, inflow, plotting
from .engine import log_spaced_ts, run_ensemble, run_trajectory
from .params import ModelParams, ParameterError
from .strategy import Strategy, StrategyError, contrarian_mix, majority_rule

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {path}: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"config root must be an object in {path}")
    return cfg


def _resolve_params(args, cfg: dict) -> ModelParams:
    def pick(flag, key, default=None):
        v = getattr(args, flag, None)
        if v is not None:
            return v
        return cfg.get(key, default)

    n = pick("n", "n")
    if n is None:
        n = cfg.get("horizon", 20_000)
    try:
        return ModelParams(
            q=float(pick("q", "q", 0.55)),
            K=int(pick("K", "K", 7)),
            C=int(pick("C", "C", 3)),
            lam=float(pick("lam", "lambda", 0.0)),
            n=int(n),
            iota=float(pick("iota", "iota", 0.0)),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ParameterError):
            raise
        raise ConfigError(f"bad parameter value: {e}") from e


def _resolve_strategy(spec: str, params: ModelParams) -> Strategy:
    if spec in (None, "majority"):
        return majority_rule(params)
    if spec == "majority-signal-ties":
        return majority_rule(params, tie_break="signal")
    if spec.startswith("family:p="):
        return contrarian_mix(params, float(spec[len("family:p="):]))
    if spec.endswith(".json"):
        p = Path(spec)
        if not p.exists():
            raise ConfigError(f"strategy file not found: {spec}")
        return Strategy.from_json(p.read_text(), name=p.stem)
    raise ConfigError(
        f"unknown strategy {spec!r}; use majority, majority-signal-ties, "
        "family:p=<value>, or a .json path"
    )


def _config_block(args, params: ModelParams, extra: dict | None = None) -> dict:
    block = {
        "command": args.command,
        "q": params.q, "K": params.K, "C": params.C,
        "lambda": params.lam, "n": params.n, "iota": params.iota,
        "strategy": getattr(args, "strategy", None) or "majority",
        "m_runs": getattr(args, "m_runs", None),
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", 1),
    }
    block.update(extra or {})
    return block


def _write_json(path: Path, config: dict, payload: dict) -> None:
    doc = {"config": config}
    doc.update(payload)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True,
                               allow_nan=True) + "\n")


def _write_csv(path: Path, config: dict, header: list[str],
               rows: list[list]) -> None:
    lines = ["# config: " + json.dumps(config, sort_keys=True)]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


def _outdir(args) -> Path:
    out = args.out or os.environ.get("VIRALSHARE_OUT", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _list_of_floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"bad numeric list {text!r}: {e}") from e


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    cfg = _load_config(args.config)
    params = _resolve_params(args, cfg)
    sigma = _resolve_strategy(args.strategy, params)
    out = _outdir(args)
    config = _config_block(args, params)
    reports = analysis.fixed_points(sigma, params)
    payload = {"fixed_points": [
        {"x": r.x_star, "residual": r.residual, "stability": r.stability,
         "label": r.label} for r in reports]}
    _write_json(out / "analyze.json", config, payload)
    _write_csv(out / "analyze.csv", config,
               ["x_star", "residual", "stability", "label"],
               [[r.x_star, r.residual, r.stability, r.label]
                for r in reports])
    xs = np.linspace(0.0, 1.0, 513)
    phi = inflow.inflow_accuracy(sigma, params, xs, iota=params.iota)
    (out / "analyze.svg").write_text(plotting.svg_line_plot(
        [(xs, phi, "phi(x)")], title="inflow accuracy",
        xlabel="x", ylabel="phi", identity_line=True,
        vlines=[r.x_star for r in reports]) + "\n")
    return EXIT_OK


def cmd_lambda_star(args) -> int:
    cfg = _load_config(args.config)
    params = _resolve_params(args, cfg)
    out = _outdir(args)
    result = analysis.critical_virality(params.q, params.K, params.C,
                                        tol=args.tol)
    config = _config_block(args, params, {"tol": args.tol})
    _write_json(out / "lambda_star.json", config, {
        "lambda_star": (result.lambda_star if result.finite else "infinity"),
        "bracket_width": result.bracket_width,
        "witness_x": result.witness_x,
        "lower_bound": 1.0 - 1.0 / (2.0 * params.q),
    })
    if not args.quiet:
        print(f"lambda_star = "
              f"{result.lambda_star if result.finite else 'infinity'}")
    return EXIT_OK


def cmd_statics(args) -> int:
    qs = _list_of_floats(args.q_list)
    Ks = [int(v) for v in _list_of_floats(args.K_list)]
    Cs = [int(v) for v in _list_of_floats(args.C_list)]
    grid = [(q, K, C) for q in qs for K in Ks for C in Cs if 2 * C <= K]
    if not grid:
        raise ConfigError("statics grid is empty after validity filtering")
    table = analysis.comparative_statics_table(grid)
    out = _outdir(args)
    config = {"command": "statics", "q_list": qs, "K_list": Ks, "C_list": Cs}
    _write_csv(out / "statics.csv", config,
               ["q", "K", "C", "lambda_star", "bound", "bound_ok",
                "violations"],
               [[e["q"], e["K"], e["C"],
                 e["lambda_star"] if math.isfinite(e["lambda_star"])
                 else "infinity",
                 e["bound"], e["bound_ok"],
                 ";".join(e["violations"])] for e in table])
    _write_json(out / "statics.json", config, {"entries": [
        {k: (v if not (isinstance(v, float) and math.isinf(v))
             else "infinity") for k, v in e.items()} for e in table]})
    bad = [e for e in table if e["violations"] or not e["bound_ok"]]
    if bad and not args.quiet:
        print(f"{len(bad)} grid entries flagged")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    params = _resolve_params(args, cfg)
    sigma = _resolve_strategy(args.strategy, params)
    out = _outdir(args)
    m = args.m_runs if args.m_runs is not None else cfg.get("m_runs", 1)
    seed = args.seed if args.seed is not None else cfg.get("base_seed", 0)
    radius = cfg.get("classify_radius", 0.08)
    fps = analysis.fixed_points(sigma, params)
    steady = [r for r in fps if r.is_steady_state]
    config = _config_block(args, params,
                           {"m_runs": m, "seed": seed,
                            "classify_radius": radius})
    if args.trajectory or m == 1:
        res = run_trajectory(sigma, params, seed, fixed_points=steady,
                             radius=radius)
        _write_csv(out / "trajectory.csv", config, ["t", "x", "z"],
                   [[int(t), float(x), float(z)] for t, x, z
                    in zip(res.path_t, res.path_x, res.path_z)])
        if not args.quiet:
            print(f"final_x={res.final_x:.6f} "
                  f"assigned={res.assigned_fixed_point}")
        return EXIT_OK
    stats = run_ensemble(sigma, params, m, seed, fixed_points=steady,
                         radius=radius)
    seeds = [seed ^ i for i in range(m)]
    _write_csv(out / "ensemble.csv", config,
               ["run_id", "seed", "final_x", "final_z", "assigned_fp"],
               [[i, seeds[i], float(stats.final_x[i]),
                 float(stats.final_z[i]),
                 int(stats.assigned[i]) if stats.assigned[i] >= 0
                 else "unassigned"] for i in range(m)])
    _write_json(out / "ensemble.json", config, {
        "fixed_points": [r.x_star for r in steady],
        "frequencies": stats.frequencies.tolist(),
        "standard_errors": stats.standard_errors.tolist(),
        "unassigned_fraction": stats.unassigned_fraction,
        "mean_final_x": stats.mean_final_x,
        "informative_fraction": stats.informative_fraction,
    })
    if not args.quiet:
        print(f"mean_final_x={stats.mean_final_x:.6f}")
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    cfg = _load_config(args.config)
    params = _resolve_params(args, cfg)
    out = _outdir(args)
    m = args.m_runs if args.m_runs is not None else cfg.get("m_runs", 1000)
    seed = args.seed if args.seed is not None else cfg.get("base_seed", 0)
    config = _config_block(args, params, {"m_runs": m, "seed": seed,
                                          "mode": args.mode,
                                          "observe_from": args.observe_from})
    if args.mode == "posteriors":
        sigma = _resolve_strategy(args.strategy, params)
        table = equilibrium.empirical_posteriors(sigma, params, m, seed,
                                                 observe_from=args.observe_from)
        rows = []
        for s_idx in (0, 1):
            for k in range(params.K + 1):
                rows.append([2 * s_idx - 1, k, float(table.probs[s_idx, k]),
                             float(table.standard_errors[s_idx, k]),
                             int(table.counts[s_idx, k]),
                             bool(table.low_confidence[s_idx, k])])
        _write_csv(out / "posteriors.csv", config,
                   ["s", "k", "prob", "se", "count", "low_confidence"], rows)
        return EXIT_OK
    family = equilibrium.default_family(params)
    p_grid = _list_of_floats(args.p_grid)
    if args.mode == "solve":
        sol = equilibrium.solve_mixing_equilibrium(
            family, params, p_grid, m, seed,
            observe_from=args.observe_from)
        _write_json(out / "mixing.json", config, {
            "p_grid": sol.p_grid.tolist(), "gaps": sol.gaps.tolist(),
            "gap_ses": sol.gap_ses.tolist(), "p_hat": sol.p_hat,
            "n": sol.n, "status": sol.status, "pivot": list(sol.pivot)})
        if not args.quiet:
            print(f"p_hat={sol.p_hat} status={sol.status}")
        return EXIT_OK
    if args.mode == "curve":
        schedule = [int(v) for v in _list_of_floats(args.n_schedule)]
        est = equilibrium.estimate_limit_equilibrium(family, params, schedule,
                                                     m, p_grid, seed)
        _write_json(out / "pn_curve.json", config, {
            "n_schedule": est.n_schedule.tolist(),
            "p_hat": [s.p_hat for s in est.solutions],
            "p_limit": est.p_limit,
            "ci": list(est.ci) if est.ci else None,
            "plateaued": est.plateaued})
        pts = [(n, s.p_hat) for n, s in zip(est.n_schedule, est.solutions)
               if s.p_hat is not None]
        if pts:
            (out / "pn_curve.svg").write_text(plotting.svg_line_plot(
                [([p[0] for p in pts], [p[1] for p in pts], "p_n")],
                title="mixing probability vs horizon", xlabel="n",
                ylabel="p_n") + "\n")
        return EXIT_OK
    raise ConfigError(f"unknown equilibrium mode {args.mode!r}")


def cmd_design(args) -> int:
    cfg = _load_config(args.config)
    params = _resolve_params(args, cfg)
    out = _outdir(args)
    m = args.m_runs if args.m_runs is not None else cfg.get("m_runs", 2000)
    seed = args.seed if args.seed is not None else cfg.get("base_seed", 0)
    names = [s.strip() for s in args.objectives.split(",") if s.strip()]
    objectives = {name: design.resolve_objective(name) for name in names}
    grid = _list_of_floats(args.lambda_grid)
    report = design.optimize_lambda(objectives, params, grid, m, seed,
                                    estimator=args.estimator)
    config = _config_block(args, params, {
        "m_runs": m, "seed": seed, "objectives": names,
        "lambda_grid": grid, "estimator": args.estimator})
    rows = [[name, lam, est.estimate, est.ci[0], est.ci[1], est.runs]
            for (name, lam), est in sorted(report.estimates.items())]
    _write_csv(out / "design.csv", config,
               ["objective", "lambda", "estimate", "ci_lo", "ci_hi", "runs"],
               rows)
    _write_json(out / "design.json", config, {
        "lambda_star": report.lambda_star,
        "argmax": report.argmax,
        "argmax_at_least_lambda_star": report.argmax_at_least_lambda_star,
        "estimates": {f"{name}@{lam}": est.estimate
                      for (name, lam), est in sorted(report.estimates.items())},
    })
    return EXIT_OK


def cmd_robustness(args) -> int:
    cfg = _load_config(args.config)
    params = _resolve_params(args, cfg)
    out = _outdir(args)
    m = args.m_runs if args.m_runs is not None else cfg.get("m_runs", 200)
    seed = args.seed if args.seed is not None else cfg.get("base_seed", 0)
    grid = _list_of_floats(args.iota_grid)
    rep = design.robustness_report(params, grid, m, seed,
                                   simulate=not args.no_simulate)
    config = _config_block(args, params, {"m_runs": m, "seed": seed,
                                          "iota_grid": grid})
    _write_json(out / "robustness.json", config, {
        "iota_lower": rep.iota_lower,
        "maximizer_on_boundary": rep.maximizer_on_boundary,
        "iota_grid": rep.iota_grid.tolist(),
        "misleading_present": rep.misleading_present.tolist(),
        "informative_x": [None if math.isnan(v) else v
                          for v in rep.informative_x],
        "cluster_agreement": {str(k): (None if math.isnan(v) else v)
                              for k, v in rep.cluster_agreement.items()},
        "threshold_consistent": rep.threshold_consistent,
    })
    if not args.quiet:
        print(f"iota_lower={rep.iota_lower:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viralshare",
        description="Social learning from viral content: analysis, "
                    "simulation, equilibrium estimation, platform design.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, strategy=True):
        p.add_argument("--q", type=float, default=None)
        p.add_argument("--K", type=int, default=None)
        p.add_argument("--C", type=int, default=None)
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--iota", type=float, default=None)
        p.add_argument("--n", type=int, default=None,
                       help="horizon (number of agents)")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=None,
                       help="output directory (default $VIRALSHARE_OUT or .)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap for simulation batches")
        p.add_argument("--quiet", action="store_true")
        if strategy:
            p.add_argument("--strategy", default=None,
                           help="majority | majority-signal-ties | "
                                "family:p=<v> | path.json")

    p = sub.add_parser("analyze", help="fixed points of the inflow map")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("lambda-star", help="critical virality weight")
    common(p, strategy=False)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_lambda_star)

    p = sub.add_parser("statics", help="comparative statics tables")
    p.add_argument("--q-list", required=True)
    p.add_argument("--K-list", required=True)
    p.add_argument("--C-list", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_statics, command="statics")

    p = sub.add_parser("simulate", help="trajectories and ensembles")
    common(p)
    p.add_argument("--m-runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trajectory", action="store_true",
                   help="record a single sampled path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("equilibrium",
                       help="posteriors, mixing solve, p_n curve")
    common(p)
    p.add_argument("--mode", choices=("posteriors", "solve", "curve"),
                   default="posteriors")
    p.add_argument("--m-runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--p-grid", default="0.0,0.1,0.2,0.3,0.4")
    p.add_argument("--n-schedule", default="2000,5000,10000,20000")
    p.add_argument("--observe-from", type=int, default=0,
                   help="pool observations only from positions above this "
                        "arrival count (0 = all post-seeding positions)")
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("design", help="objective sweep over lambda")
    common(p, strategy=False)
    p.add_argument("--m-runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--objectives", default="accuracy")
    p.add_argument("--lambda-grid", required=True)
    p.add_argument("--estimator", choices=("ensemble", "limit"),
                   default="ensemble")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("robustness", help="manipulation sweep below lam*")
    common(p, strategy=False)
    p.add_argument("--m-runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iota-grid", required=True)
    p.add_argument("--no-simulate", action="store_true")
    p.set_defaults(func=cmd_robustness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, ParameterError, StrategyError,
            design.EquilibriumUnresolvedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except analysis.RootIsolationError as e:
        print(f"numerical resolution failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
