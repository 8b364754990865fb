"""Command-line front end.

Subcommands::

    l0flow solve PROBLEM.json [overrides]   solve one problem file
    l0flow bench KIND [--seeds N ...]       run an experiment batch
    l0flow check [--json]                   fast invariant self-test

Exit codes are stable API: 0 success/certified, 1 usage or data error,
2 horizon reached without convergence, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench as bench_mod
from .correction import partition, solve_and_correct
from .dynamics import Certificate, MuSchedule, NumericalDivergenceError
from .model import (
    BoxSet,
    ConfigurationError,
    DataError,
    DynamicsParams,
    ScheduleKind,
    project_box,
)
from .problem_io import load_problem
from .smoothing import theta, theta_grad_mu, theta_grad_s
from .splitting import TwoSidedSpec, solve_two_sided, split

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MAX_HORIZON = 2
EXIT_DIVERGED = 3

FAULT_ENV = "L0FLOW_FAULT_INJECT"


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the CLI contract reserves 2 for
    # non-converged solves, so usage errors are remapped to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def _add_override_flags(p: argparse.ArgumentParser):
    p.add_argument("--gamma", type=float, help="flow speed")
    p.add_argument("--alpha0", type=float, help="annealing start value")
    p.add_argument("--beta", type=float, help="annealing decay rate")
    p.add_argument("--mu-star", dest="mu_star", type=float,
                   help="smoothing floor (auto-selected when omitted)")
    p.add_argument("--step", type=float, help="integrator step size")
    p.add_argument("--horizon", type=float, help="integration time budget")
    p.add_argument("--tol", dest="residual_tol", type=float,
                   help="stationarity residual tolerance")


def _collect_overrides(args) -> dict:
    keys = ("gamma", "alpha0", "beta", "mu_star", "step", "horizon",
            "residual_tol")
    return {k: getattr(args, k) for k in keys
            if getattr(args, k, None) is not None}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="l0flow",
                     description="Cardinality-penalized sparse regression on a box")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_solve = sub.add_parser("solve", help="solve a problem JSON file")
    p_solve.add_argument("problem", help="path to the problem file")
    _add_override_flags(p_solve)
    p_solve.add_argument("--out", help="write the report JSON here instead of stdout")
    p_solve.add_argument("--traj", help="stream trajectory samples to this CSV")
    p_solve.add_argument("--defaults", action="store_true",
                         help="print the solver defaults for this problem and exit")

    p_bench = sub.add_parser("bench", help="run a benchmark experiment")
    p_bench.add_argument("kind",
                         choices=[k.value for k in bench_mod.ExperimentKind],
                         help="experiment family")
    p_bench.add_argument("--seeds", type=int, default=1,
                         help="number of seeds (0, 1, ..., N-1)")
    p_bench.add_argument("--scale", choices=["desk", "paper"], default="desk")
    p_bench.add_argument("--multistart", action="store_true",
                         help="vary the start, not the instance, across seeds")
    _add_override_flags(p_bench)
    p_bench.add_argument("--out", help="write the aggregate report JSON here")
    p_bench.add_argument("--defaults", action="store_true",
                         help="print the experiment protocol defaults and exit")

    p_check = sub.add_parser("check", help="run the fast invariant suite")
    p_check.add_argument("--json", action="store_true",
                         help="machine-readable results")
    return parser


def _report_json(report, x, support, mu_star) -> dict:
    return {
        "x": [float(v) for v in x],
        "support": list(support),
        "objective_true": report.objective_true,
        "objective_smooth": report.objective_smooth,
        "residual": report.final_residual,
        "iterations": report.iterations,
        "certificate": report.certificate.value,
        "mu_star": mu_star,
    }


def cmd_solve(args) -> int:
    problem = load_problem(args.problem)
    overrides = _collect_overrides(args)

    if isinstance(problem, TwoSidedSpec):
        split_problem = split(problem)
        params = DynamicsParams.for_problem(split_problem, **overrides)
        if args.defaults:
            print(json.dumps(_params_dict(params), indent=2))
            return EXIT_OK
        solution = solve_two_sided(problem, params, correct_max_horizon=False,
                                   traj_path=args.traj)
        report = solution.report
        payload = _report_json(report, solution.y, solution.support, params.mu_star)
    else:
        params = DynamicsParams.for_problem(problem, **overrides)
        if args.defaults:
            print(json.dumps(_params_dict(params), indent=2))
            return EXIT_OK
        x0 = np.minimum(np.ones(problem.dim), problem.box.upper)
        report = solve_and_correct(problem, params, x0,
                                   correct_max_horizon=False,
                                   traj_path=args.traj)
        payload = _report_json(report, report.final_x, report.support,
                               params.mu_star)

    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    if report.certificate is Certificate.MAX_HORIZON:
        return EXIT_MAX_HORIZON
    if report.certificate is Certificate.CERTIFIED_LOCAL_MIN:
        return EXIT_OK
    return EXIT_MAX_HORIZON


def _params_dict(params: DynamicsParams) -> dict:
    return {
        "gamma": params.gamma,
        "alpha0": params.alpha0,
        "beta": params.beta,
        "mu_star": params.mu_star,
        "schedule": params.schedule.value,
        "step": params.step,
        "horizon": params.horizon,
        "residual_tol": params.residual_tol,
    }


def cmd_bench(args) -> int:
    if args.defaults:
        print(json.dumps(bench_mod.experiment_defaults(args.kind), indent=2))
        return EXIT_OK
    seeds = tuple(range(args.seeds))
    overrides = _collect_overrides(args)
    config = bench_mod.ExperimentConfig.default(
        args.kind, seeds=seeds, scale=args.scale, multistart=args.multistart,
        **overrides)
    report = bench_mod.run_experiment(config)

    rows = report["per_seed"]
    print(f"{'seed':>6} {'mse':>12} {'cert':>18} {'wall_ms':>10}  support")
    for r in rows:
        if "error" in r:
            print(f"{r['seed']:>6} {'-':>12} {'ERROR':>18} {'-':>10}  {r['error']}")
        else:
            supp = ",".join(str(i) for i in r["support"])
            print(f"{r['seed']:>6} {r['mse']:>12.4e} {r['certificate']:>18} "
                  f"{r['wall_ms']:>10.1f}  [{supp}]")
    agg = report["aggregate"]
    if agg["mean_mse"] is not None:
        print(f"Mean-MSE {agg['mean_mse']:.4e}  Max-MSE {agg['max_mse']:.4e}  "
              f"Min-MSE {agg['min_mse']:.4e}")
        print(f"Mean-ms  {agg['mean_ms']:.1f}  Max-ms  {agg['max_ms']:.1f}  "
              f"Min-ms  {agg['min_ms']:.1f}")
    if args.out:
        bench_mod.write_report(report, args.out)
    failed = [r for r in rows if "error" in r]
    return EXIT_ERROR if failed else EXIT_OK


def _invariant_checks():
    """Fast seeded property suite; yields (name, passed) pairs."""
    rng = np.random.default_rng(7)
    fault = os.environ.get(FAULT_ENV, "")
    bump = 1e-3 if fault == "smoothing" else 0.0

    def value(s, mu):
        return theta(s, mu) + bump

    # Continuity at the two breakpoints, value and slope.
    eps = 1e-10
    ok = True
    for mu in (0.3, 0.6, 0.9):
        for bp in (mu / 3.0, mu):
            ok &= abs(value(bp - eps, mu) - value(bp + eps, mu)) < 1e-8
            ok &= abs(theta_grad_s(bp - eps, mu) - theta_grad_s(bp + eps, mu)) < 1e-6
    yield "smoothing breakpoint continuity", ok

    # Central finite differences against both partials, off the breakpoints.
    ok = True
    h = 1e-7
    for _ in range(200):
        mu = float(rng.uniform(0.2, 2.0))
        s = float(rng.uniform(0.0, 1.5 * mu))
        if min(abs(s - mu / 3), abs(s - mu), abs(mu - 3 * s)) < 1e-3:
            continue
        fd_s = (value(s + h, mu) - value(s - h, mu)) / (2 * h)
        fd_mu = (theta(s, mu + h) - theta(s, mu - h)) / (2 * h)
        ok &= abs(fd_s - theta_grad_s(s, mu)) <= 1e-6 * max(1.0, abs(fd_s))
        ok &= abs(fd_mu - theta_grad_mu(s, mu)) <= 1e-6 * max(1.0, abs(fd_mu))
    yield "smoothing gradient finite differences", ok

    # Range and monotonicity of the surrogate.
    ok = True
    for _ in range(200):
        mu = float(rng.uniform(0.1, 2.0))
        s = float(rng.uniform(0.0, 3.0))
        v = value(s, mu) - bump
        ok &= -1e-12 <= v <= 1.0 + 1e-12
        ok &= theta_grad_s(s, mu) >= 0.0
        ok &= theta_grad_mu(s, mu) <= 1e-15
    yield "smoothing bounds and monotonicity", ok

    # Projection: idempotent, feasible, nonexpansive.
    ok = True
    box = BoxSet(np.array([-1.0, 0.0, 2.0]), np.array([1.0, 3.0, 2.0]))
    for _ in range(200):
        u = rng.normal(size=3) * 4
        w = rng.normal(size=3) * 4
        pu, pw = project_box(u, box), project_box(w, box)
        ok &= np.allclose(project_box(pu, box), pu)
        ok &= box.contains(pu, tol=1e-15)
        ok &= np.linalg.norm(pu - pw) <= np.linalg.norm(u - w) + 1e-12
    yield "projection idempotent and nonexpansive", ok

    # Partition: every index lands in exactly one band.
    ok = True
    boxp = BoxSet.nonnegative(np.full(6, 1.0))
    for _ in range(200):
        x = rng.uniform(0.0, 1.0, 6)
        mu_star = float(rng.uniform(0.05, 0.5))
        part = partition(x, mu_star, boxp)
        idx = sorted(part.I + part.J + part.K)
        ok &= idx == list(range(6))
        ok &= not (set(part.I) & set(part.J)) and not (set(part.J) & set(part.K))
    yield "support partition exhaustive and disjoint", ok

    # Annealing schedule: strictly decreasing toward mu_star / 2.
    ok = True
    for kind in ScheduleKind:
        sched = MuSchedule(kind, alpha0=1.0, beta=1.0, mu_star=0.01)
        ts = np.linspace(0.0, 50.0, 200)
        vals = np.array([sched.mu_at(t) for t in ts])
        ok &= bool(np.all(np.diff(vals) < 0))
        ok &= abs(sched.mu_at(0.0) - 0.5 * (1.0 + 0.01)) < 1e-15
        ok &= sched.mu_at(1e9) - 0.005 < 1e-6
    yield "annealing schedule shape", ok


def cmd_check(args) -> int:
    results = [(name, bool(passed)) for name, passed in _invariant_checks()]
    if args.json:
        print(json.dumps({name: passed for name, passed in results}, indent=2))
    else:
        for name, passed in results:
            print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return EXIT_OK if all(p for _, p in results) else EXIT_ERROR


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "check":
            return cmd_check(args)
        parser.error(f"unknown command {args.command!r}")
    except NumericalDivergenceError as exc:
        print(f"l0flow: numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigurationError, DataError, OSError) as exc:
        print(f"l0flow: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
