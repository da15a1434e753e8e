"""Command-line front end.

Exit codes: 0 success, 1 a verification check failed, 2 usage or
configuration error (including an ill-posed model, whose margin is printed).
Output is a pure function of the model file, the flags and the seed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import kernels, report, verify
from .closed_form import (ProportionalStrategy, optimal_strategy, proportional_objective, solve,
                          transversality_threshold, value, value_d1, value_d2)
from .hjb_numeric import (BOUNDARY_MODES, GuardViolation, Grid, policy_iteration,
                          solve_scalar_constant)
from .model import InvalidModelError, ModelSpec, kappa_max, margin, require_well_posed
from .sde import SCHEMES, SimConfig, optimal_path_exact, simulate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load(args) -> ModelSpec:
    path = Path(args.model)
    if not path.is_file():
        raise ConfigError(f"model file not found: {path}")
    return ModelSpec.load(path)


def _header(spec: ModelSpec, command: str, seed: int | None = None) -> dict:
    out = {"command": command, "model": spec.to_dict(), "model_digest": spec.digest()}
    if seed is not None:
        out["seed"] = seed
    return out


def _strategy(spec: ModelSpec, args) -> ProportionalStrategy:
    opt = optimal_strategy(spec) if (args.kappa is None or args.theta is None) else None
    k = opt.kappa if args.kappa is None else args.kappa
    t = opt.theta if args.theta is None else args.theta
    return ProportionalStrategy(k, t)


def _emit(args, name: str, payload: dict, tables: dict | None = None) -> None:
    """JSON to ``<out>/<name>.json`` (or stdout); with ``--format csv`` the tables instead."""
    out = Path(args.out) if args.out else None
    if args.format == "csv" and tables:
        if out is None:
            if len(tables) != 1:
                raise ConfigError("csv output with several tables needs --out")
            cols = next(iter(tables.values()))
            names = list(cols)
            sys.stdout.write(",".join(names) + "\n")
            for row in zip(*(np.asarray(cols[n]) for n in names)):
                sys.stdout.write(",".join(report.fmt_float(float(v)) for v in row) + "\n")
            return
        for tname, cols in tables.items():
            report.write_csv(out / f"{tname}.csv", cols)
        return
    text = report.dumps(payload)
    if out is None:
        sys.stdout.write(text)
    else:
        report.write_atomic(out / f"{name}.json", text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    spec = _load(args)
    require_well_posed(spec)
    sol = solve(spec)
    payload = _header(spec, "solve")
    payload["solution"] = sol.to_dict()
    payload["kappa_0"] = kappa_max(spec)
    payload["margin"] = margin(spec)
    x = verify.log_grid(1e-3, 1e3, args.points)
    tables = {"value": {"x": x, "V": value(spec, x), "V_x": value_d1(spec, x),
                        "V_xx": value_d2(spec, x)}}
    _emit(args, "solve", payload, tables)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _load(args)
    cfg = SimConfig(args.horizon, args.steps, args.paths, args.seed, args.scheme)
    if args.exact:
        bundle = optimal_path_exact(spec, args.x, cfg)
        strat = optimal_strategy(spec)
    else:
        strat = _strategy(spec, args)
        bundle = simulate(spec, strat, args.x, cfg)
    payload = _header(spec, "simulate", args.seed)
    payload["strategy"] = {"kappa": strat.kappa, "theta": strat.theta}
    payload["x"] = args.x
    payload["exact_law"] = bool(args.exact)
    payload["summary"] = bundle.summary()
    if args.format == "csv":
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            bundle.to_csv(Path(args.out) / "paths.csv")
        else:
            bundle.to_csv(sys.stdout)
        return EXIT_OK
    _emit(args, "simulate", payload)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    spec = _load(args)
    strat = _strategy(spec, args)
    if args.x <= 0:
        raise ConfigError(f"initial wealth must be > 0, got {args.x}")
    cfg = None
    if args.horizon is not None or args.steps is not None or args.scheme != "exact-log":
        cfg = verify._default_cfg(spec, strat, args.paths, args.seed, args.horizon, args.steps,
                                  args.scheme)
    res = verify.mc_objective(spec, strat, args.x, cfg, paths=args.paths, seed=args.seed)
    payload = _header(spec, "evaluate", args.seed)
    payload["strategy"] = {"kappa": strat.kappa, "theta": strat.theta}
    payload["x"] = args.x
    payload["closed_form_objective"] = proportional_objective(spec, strat, args.x)
    payload["mc"] = res.to_dict()
    payload["interval"] = list(res.interval())
    _emit(args, "evaluate", payload)
    return EXIT_OK


def _random_strategies(seed: int, n: int = 10) -> list[ProportionalStrategy]:
    rng = np.random.default_rng(seed)
    return [ProportionalStrategy(float(k), float(t))
            for k, t in zip(rng.uniform(0.02, 1.0, n), rng.uniform(-1.0, 1.0, n))]


def _hjb_verdict(spec: ModelSpec, nodes: int = 400, tol: float = 1e-3) -> verify.Verdict:
    a_num = solve_scalar_constant(spec)
    inputs = {"model": spec.to_dict(), "nodes": nodes, "y_range": [-3.0, 3.0]}
    try:
        sol = policy_iteration(spec, Grid(-3.0, 3.0, nodes))
    except GuardViolation as exc:
        return verify.Verdict("hjb_numeric", False, inputs, details={"guard_violation": str(exc)})
    opt = optimal_strategy(spec)
    err = float(sol.relative_error(spec).max())
    dk = float(np.max(np.abs(sol.kappa - opt.kappa)))
    dt = float(np.max(np.abs(sol.theta - opt.theta)))
    a_rel = abs(a_num - solve(spec).a) / solve(spec).a
    passed = sol.converged and err <= tol and dk <= tol and dt <= tol and a_rel <= 1e-9
    return verify.Verdict("hjb_numeric", passed, inputs, err, None, None,
                          {"scalar_constant": a_num, "scalar_constant_rel_err": a_rel,
                           "iterations": sol.iterations, "converged": sol.converged,
                           "final_residual": sol.final_residual, "max_relative_error": err,
                           "max_kappa_dev": dk, "max_theta_dev": dt,
                           "boundary_mode": sol.boundary_mode})


def run_battery(spec: ModelSpec, seed: int, paths: int, corrupt_a: float = 1.0) -> list[verify.Verdict]:
    """Every check of the verify battery, in a fixed order."""
    require_well_posed(spec)
    opt = optimal_strategy(spec)
    a = solve(spec).a * corrupt_a
    out = [
        verify.residual_sweep(spec, verify.log_grid(), a=a),
        replace(verify.residual_sweep(spec, verify.log_grid(), a=0.0), name="residual_sweep_trivial"),
        verify.homogeneity_check(spec, [0.5, 2.0, 10.0], [0.3, 1.0, 7.0]),
    ]

    # budget binds for the optimum over a long horizon: estimate within 1% of x
    v = verify.budget_check(spec, opt, 1.0, SimConfig(300.0, 3000, paths, seed))
    near = abs(v.estimate - 1.0) <= 0.01
    out.append(replace(v, name="budget_optimal_long_horizon",
                       passed=v.passed and near and v.details["matches_analytic"],
                       details={**v.details, "within_one_percent": bool(near)}))
    for i, st in enumerate(_random_strategies(seed)):
        v = verify.budget_check(spec, st, 1.0, SimConfig(1.0, 100, paths, seed + 1 + i))
        out.append(replace(v, name=f"budget_random_{i}",
                           passed=v.passed and v.details["matches_analytic"]))

    out.append(verify.martingale_check(spec, opt, 1.0, SimConfig(10.0, 200, paths, seed)))
    out.append(verify.three_way_check(spec, 1.0, paths, seed))

    ks, ts = verify.default_sweep_grid(spec)
    sw = verify.strategy_grid_sweep(spec, 1.0, ks, ts)
    out.append(verify.Verdict("strategy_grid_sweep", sw.hit,
                              {"model": spec.to_dict(), "kappas": ks.tolist(), "thetas": ts.tolist()},
                              float(sw.table.max()), None, None,
                              {"argmax": list(sw.argmax), "nearest_to_optimum": list(sw.nearest)}))
    grid = [ProportionalStrategy(float(k), float(t)) for k in ks for t in ts]
    out.append(verify.dominance_check(spec, 1.0, grid, paths=max(2, paths // 5), seed=seed))
    out.append(verify.transversality_check(spec))
    out.append(_hjb_verdict(spec))
    return out


def cmd_verify(args) -> int:
    spec = _load(args)
    verdicts = run_battery(spec, args.seed, args.paths, args.debug_corrupt_a)
    records = [v.record() for v in verdicts]
    ok = all(r["pass"] for r in records)
    payload = _header(spec, "verify", args.seed)
    payload["paths"] = args.paths
    payload["backend"] = kernels.get_backend()
    payload["debug_corrupt_a"] = args.debug_corrupt_a
    payload["all_pass"] = ok
    payload["checks"] = records
    _emit(args, "verify", payload)
    for r in records:
        print(f"{'PASS' if r['pass'] else 'FAIL'} {r['name']}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_hjb(args) -> int:
    spec = _load(args)
    grid = Grid(args.y_min, args.y_max, args.nodes)
    sol = policy_iteration(spec, grid, tol=args.tol, max_iter=args.max_iter, boundary=args.boundary)
    err = sol.relative_error(spec)
    opt = optimal_strategy(spec)
    payload = _header(spec, "hjb")
    payload["grid"] = {"y_min": grid.y_min, "y_max": grid.y_max, "n_nodes": grid.n_nodes}
    payload["boundary_mode"] = sol.boundary_mode
    payload["iterations"] = sol.iterations
    payload["converged"] = sol.converged
    payload["final_residual"] = sol.final_residual
    payload["max_relative_error"] = float(err.max())
    payload["max_kappa_dev"] = float(np.max(np.abs(sol.kappa - opt.kappa)))
    payload["max_theta_dev"] = float(np.max(np.abs(sol.theta - opt.theta)))
    payload["scalar_constant"] = solve_scalar_constant(spec)
    payload["residual_history"] = list(sol.residual_history)
    _emit(args, "hjb", payload, {"hjb_nodes": sol.node_table(spec)})
    return EXIT_OK


def cmd_report(args) -> int:
    """Plot-ready CSV tables plus a JSON index; needs ``--out``."""
    if not args.out:
        raise ConfigError("report needs --out")
    spec = _load(args)
    require_well_posed(spec)
    out = Path(args.out)
    x = verify.log_grid()
    tables = {"value": {"x": x, "V": value(spec, x), "V_x": value_d1(spec, x), "V_xx": value_d2(spec, x)}}
    res, rel = verify.residual_profile(spec, x)
    tables["residuals"] = {"x": x, "residual": res, "relative_residual": rel}
    ks, ts = verify.default_sweep_grid(spec, refine=2)
    sw = verify.strategy_grid_sweep(spec, 1.0, ks, ts)
    kk, tt = np.meshgrid(ks, ts, indexing="ij")
    tables["sweep"] = {"kappa": kk.ravel(), "theta": tt.ravel(), "J": sw.table.ravel()}
    star = transversality_threshold(spec)
    t = np.linspace(0.0, 200.0, 41)
    tr = {"t": t}
    for label, al in (("below", 0.8 * star), ("at", star), ("above", 1.2 * star)):
        tr[f"discounted_value_{label}"] = verify.transversality_probe(spec, al, t).values
    tables["transversality"] = tr
    cfg = SimConfig(10.0, 200, args.paths, args.seed)
    prof = verify.martingale_profile(spec, optimal_strategy(spec), 1.0, cfg)
    tables["martingale"] = prof
    sol = policy_iteration(spec, Grid(-3.0, 3.0, 400))
    tables["hjb_nodes"] = sol.node_table(spec)
    for name, cols in tables.items():
        report.write_csv(out / f"{name}.csv", cols)
    index = _header(spec, "report", args.seed)
    index["paths"] = args.paths
    index["backend"] = kernels.get_backend()
    index["tables"] = {name: sorted(cols) for name, cols in tables.items()}
    index["sweep_argmax"] = list(sw.argmax)
    index["transversality_threshold"] = star
    report.write_atomic(out / "report.json", report.dumps(index))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="JSON file with r, mu, sigma, rho, gamma")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--seed", type=int, default=verify.DEFAULT_SEED)
    common.add_argument("--format", choices=("json", "csv"), default="json")

    strat = argparse.ArgumentParser(add_help=False)
    strat.add_argument("--kappa", type=float, help="consumption fraction (default: optimal)")
    strat.add_argument("--theta", type=float, help="risky fraction (default: optimal)")
    strat.add_argument("--x", type=float, default=1.0, help="initial wealth")

    p = argparse.ArgumentParser(prog="merton-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="closed-form solution")
    s.add_argument("--points", type=int, default=50, help="rows of the value table (csv)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("simulate", parents=[common, strat], help="simulate wealth and deflator paths")
    s.add_argument("--horizon", type=float, default=1.0)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--paths", type=int, default=1)
    s.add_argument("--scheme", choices=SCHEMES, default="exact-log")
    s.add_argument("--exact", action="store_true", help="sample the optimal wealth from its explicit law")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("evaluate", parents=[common, strat], help="Monte-Carlo objective of a strategy")
    s.add_argument("--paths", type=int, default=verify.DEFAULT_PATHS)
    s.add_argument("--horizon", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--scheme", choices=SCHEMES, default="exact-log")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("verify", parents=[common], help="run the full verification battery")
    s.add_argument("--paths", type=int, default=verify.DEFAULT_PATHS)
    s.add_argument("--debug-corrupt-a", type=float, default=1.0, metavar="FACTOR",
                   help="scale the constant a in the residual sweep (debugging the harness)")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("hjb", parents=[common], help="finite-difference policy iteration")
    s.add_argument("--y-min", type=float, default=-3.0)
    s.add_argument("--y-max", type=float, default=3.0)
    s.add_argument("--nodes", type=int, default=400)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", type=int, default=500)
    s.add_argument("--boundary", choices=BOUNDARY_MODES, default="homogeneous")
    s.set_defaults(func=cmd_hjb)

    s = sub.add_parser("report", parents=[common], help="plot-ready CSV tables")
    s.add_argument("--paths", type=int, default=2000)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GuardViolation as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
