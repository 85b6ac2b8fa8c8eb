"""Command-line entry points.

Exit codes: 0 success, 1 solver did not converge, 2 bad input.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass

from . import cfr as cfr_mod
from .errors import NonConvergence, StateSpaceTooLarge, TreeTooLarge, UNSGError
from .evaluation import JOINT_STATE_BOUND, EvalReport, Method, PursuerPolicy, worst_case_reward
from .graph import GridSpec
from .meta import double_oracle_solve
from .paths import PathSet
from .scenario import BENCHMARKS, ScenarioFile, grid_skeleton, load, with_overrides

EXIT_OK, EXIT_NONCONVERGED, EXIT_INPUT = 0, 1, 2

RESULT_HEADER = "scenario,solver,value,gap,wall_time,iterations"


@dataclass
class ResultRow:
    scenario: str
    solver: str
    value: float
    gap: float | None
    wall_time: float | None
    iterations: int

    def csv(self) -> str:
        gap = "" if self.gap is None else f"{self.gap:.6g}"
        wall = "" if self.wall_time is None else f"{self.wall_time:.3f}"
        return f"{self.scenario},{self.solver},{self.value:.10g},{gap},{wall},{self.iterations}"


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_gen_grid(args) -> int:
    spec = GridSpec(args.rows, args.cols, args.side_prob, args.diag_prob, args.seed)
    sys.stdout.write("# generated grid scenario; positions and exits are placeholders\n")
    sys.stdout.write(grid_skeleton(spec).to_text())
    return EXIT_OK


def _scenario(args) -> ScenarioFile:
    sc = load(args.scenario)
    return with_overrides(sc, path_mode=getattr(args, "mode", None), max_len=getattr(args, "max_len", None),
                          path_cap=getattr(args, "cap", None))


def cmd_enumerate(args) -> int:
    sc = _scenario(args)
    ps = sc.paths()
    _write(args.out, ps.to_csv())
    print(f"count: {len(ps)} ({ps.note})", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    sc = _scenario(args)
    cfg = sc.config()
    with open(args.policy, encoding="utf-8") as fh:
        policy = PursuerPolicy.from_json(fh.read())
    if args.paths:
        with open(args.paths, encoding="utf-8") as fh:
            paths = PathSet.from_csv(fh.read(), sc.path_mode)
    else:
        paths = sc.paths(cfg)
    seed = sc.seed if args.seed is None else args.seed
    samples = sc.mc_samples if args.samples is None else args.samples
    if args.method == "auto":
        try:
            report = worst_case_reward(policy, paths, cfg, bound=args.state_bound, workers=args.workers)
        except StateSpaceTooLarge as err:
            print(f"exact evaluation infeasible ({err}); falling back to Monte Carlo", file=sys.stderr)
            report = worst_case_reward(policy, paths, cfg, Method.MONTE_CARLO, samples, seed, args.workers)
    else:
        method = {"factored": Method.FACTORED, "joint": Method.JOINT, "mc": Method.MONTE_CARLO}[args.method]
        report = worst_case_reward(policy, paths, cfg, method, samples, seed, args.workers,
                                   bound=args.state_bound)
    _write(args.out, EvalReport.CSV_HEADER + "\n" + report.csv_row(sc.id) + "\n")
    return EXIT_OK


def _run_solver(sc: ScenarioFile, solver: str, eps=None, max_iters=None, iterations=None, log=None):
    cfg = sc.config()
    t0 = time.perf_counter()
    if solver == "do":
        res = double_oracle_solve(cfg, sc.paths(cfg), eps=sc.eps if eps is None else eps,
                                  max_iters=sc.max_iters if max_iters is None else max_iters)
        if log:
            _write(log, res.log_csv())
        row = ResultRow(sc.id, "do", res.value, res.gap if res.log else None,
                        time.perf_counter() - t0, len(res.log))
        return row, res.converged
    n = sc.cfr_iterations if iterations is None else iterations
    res = cfr_mod.cfr_solve(cfg, n)
    if log:
        _write(log, res.log_csv())
    row = ResultRow(sc.id, "cfr", res.value, res.exploitability, time.perf_counter() - t0, res.iterations)
    return row, True


def cmd_solve(args) -> int:
    sc = _scenario(args)
    row, converged = _run_solver(sc, args.solver, args.eps, args.max_iters, args.iterations, args.log)
    if not args.timing:
        row.wall_time = None
    _write(args.out, RESULT_HEADER + "\n" + row.csv() + "\n")
    if not converged:
        print("NonConvergence: iteration limit reached before the bound gap closed", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_bench(args) -> int:
    lines = [RESULT_HEADER]
    status = EXIT_OK
    for name, sc in BENCHMARKS.items():
        if args.filter and args.filter not in name:
            continue
        for solver in sc.solvers:
            try:
                row, converged = _run_solver(sc, solver)
            except TreeTooLarge as err:
                print(f"{name}/{solver}: skipped ({err})", file=sys.stderr)
                continue
            if not converged:
                status = EXIT_NONCONVERGED
            if not args.timing:
                row.wall_time = None
            lines.append(row.csv())
    _write(args.out, "\n".join(lines) + "\n")
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unsg", description="Urban network security game solvers")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-grid", help="print a scenario skeleton on a generated grid")
    g.add_argument("--rows", type=int, required=True)
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--side-prob", type=float, default=1.0)
    g.add_argument("--diag-prob", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen_grid)

    def scenario_arg(sp):
        sp.add_argument("scenario", help="scenario file, or builtin:<name>")
        sp.add_argument("--out", default=None, help="output file (default stdout)")

    e = sub.add_parser("enumerate", help="list evader paths as CSV")
    scenario_arg(e)
    e.add_argument("--mode", choices=["simple", "walks"])
    e.add_argument("--max-len", type=int)
    e.add_argument("--cap", type=int)
    e.set_defaults(func=cmd_enumerate)

    v = sub.add_parser("evaluate", help="worst-case catch probability of a policy file")
    scenario_arg(v)
    v.add_argument("--policy", required=True)
    v.add_argument("--paths", help="path CSV (default: enumerate from the scenario)")
    v.add_argument("--mode", choices=["simple", "walks"])
    v.add_argument("--max-len", type=int)
    v.add_argument("--method", choices=["auto", "factored", "joint", "mc"], default="auto")
    v.add_argument("--samples", type=int)
    v.add_argument("--state-bound", type=int, default=JOINT_STATE_BOUND)
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("solve", help="solve a scenario by double oracle or CFR")
    scenario_arg(s)
    s.add_argument("--solver", choices=["do", "cfr"], default="do")
    s.add_argument("--eps", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--iterations", type=int, help="CFR iterations")
    s.add_argument("--log", help="convergence log CSV")
    s.add_argument("--timing", action="store_true", help="fill the wall_time column")
    s.add_argument("--seed", type=int, help="accepted for uniformity; both solvers are deterministic")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run every bundled scenario with its solvers")
    b.add_argument("--filter", help="only scenarios whose name contains this string")
    b.add_argument("--out", default=None)
    b.add_argument("--timing", action="store_true")
    b.add_argument("--seed", type=int, help="accepted for uniformity; both solvers are deterministic")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NonConvergence as err:
        print(f"NonConvergence: {err}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (UNSGError, ValueError, OSError) as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
