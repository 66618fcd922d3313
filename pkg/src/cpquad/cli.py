"""Command-line front end: gen, factorize, solve, pareto, oracle and bench.

Results go to stdout as JSON (or CSV for tables); timings go to stderr so
stdout is a pure function of the input bytes, the flags and the seed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import coverlin, multiobj, packlin, packsub
from .factorize import FactorizeBudget, NotFound, RankError, cp_factorize, numeric_rank, shift_factorization
from .instance import InstanceSpec, ProblemInstance, generate_instance, instance_from_dict, instance_to_dict
from .oracle import brute_force_opt, brute_force_pareto
from .parallel import set_threads
from .suites import SUITES, pareto_objectives, planted_factor, suite_instance

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2
SOLVERS = ("pack-lin", "pack-sub", "cover-lin", "bqcqp", "bmpp", "sum-ratio")


class Infeasible(Exception):
    pass


def _emit(obj, fmt: str = "json") -> None:
    if fmt == "csv":
        rows = obj if isinstance(obj, list) else [obj]
        buf = io.StringIO()
        if rows:
            keys = list(rows[0].keys())
            w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _cell(r.get(k)) for k in keys})
        sys.stdout.write(buf.getvalue())
    else:
        sys.stdout.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _cell(v):
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True)
    return v


def _read(path: str) -> tuple[dict, str]:
    raw = Path(path).read_bytes()
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"cannot parse {path}: {e}") from e
    return data, hashlib.sha256(raw).hexdigest()


def _budget(args) -> FactorizeBudget:
    return FactorizeBudget(max_restarts=args.restarts, max_iterations=args.iterations,
                           delta=args.delta, seed=args.seed)


def _ratio(value: float, opt: float) -> float:
    if opt == 0:
        return 1.0 if value == 0 else float("inf")
    return float(value / opt)


# Subcommands ----------------------------------------------------------------------


def cmd_gen(args) -> int:
    ranks = [int(r) for r in str(args.rank).split(",")]
    spec = InstanceSpec(n=args.n, m=args.m, rank=ranks[0] if len(ranks) == 1 else tuple(ranks),
                        sense=args.sense, objective=args.objective, n_objectives=args.n_objectives,
                        objective_rank=args.objective_rank, linear_term=args.linear_term)
    _emit(instance_to_dict(generate_instance(spec, args.seed)))
    return EXIT_OK


def _factor_record(Q, args) -> tuple[dict, bool]:
    Q = np.asarray(Q, dtype=float)
    r = args.rank if args.rank is not None else max(1, numeric_rank(Q))
    fact = cp_factorize(Q, r, _budget(args))
    if isinstance(fact, NotFound):
        return {"found": False, "best_residual": fact.best_residual, "restarts": fact.restarts}, False
    if args.shift is not None:
        fact = shift_factorization(Q, fact, args.shift)
    out = fact.to_json()
    out["found"] = True
    return out, True


def cmd_factorize(args) -> int:
    data, digest = _read(args.input)
    if "Q" in data:
        out, ok = _factor_record(data["Q"], args)
    else:
        inst = instance_from_dict(data)
        recs = [_factor_record(c.Q, args) for c in inst.constraints]
        out = {"constraints": [r for r, _ in recs]}
        ok = all(k for _, k in recs)
    out["record"] = {"subcommand": "factorize", "digest": digest, "seed": args.seed}
    _emit(out, args.format)
    return EXIT_OK if ok else EXIT_INFEASIBLE


def _run_solver(name: str, inst: ProblemInstance, args):
    budget = _budget(args)
    eps = args.epsilon
    extra = {}
    if name == "pack-lin":
        sol, st = packlin.pack_lin_run(inst, eps, budget)
        extra = {"lambda": st.lam, "candidates": st.candidates, "solves": st.solves}
    elif name == "pack-sub":
        run = packsub.pack_sub_run(inst, eps, args.backend, budget, args.objective_linear_geometric)
        sol = run.solution
        extra = {"collections": run.collections, "knapsack_rows": run.max_rows, "backend": args.backend}
    elif name == "cover-lin":
        try:
            sol, st = coverlin.cover_lin_run(inst, eps, budget)
        except coverlin.InfeasibleError as e:
            raise Infeasible(str(e)) from e
        extra = {"bound": st.bound, "guesses": st.guesses}
    elif name == "bqcqp":
        sol = multiobj.bqcqp_ptas(inst, eps, budget)
    elif name == "bmpp":
        sol = multiobj.bmpp_ptas(inst, eps, budget)
    else:
        sol = multiobj.sum_ratio_ptas(inst, eps, budget)
    return sol, extra


def cmd_solve(args) -> int:
    data, digest = _read(args.input)
    inst = instance_from_dict(data)
    if args.epsilon is None:
        args.epsilon = 0.02 if args.algorithm == "cover-lin" else 0.25
    t0 = time.perf_counter()
    try:
        sol, extra = _run_solver(args.algorithm, inst, args)
    except Infeasible as e:
        _emit({"feasible": False, "reason": str(e), "record": {"subcommand": f"solve {args.algorithm}",
                                                                "digest": digest, "epsilon": args.epsilon,
                                                                "seed": args.seed}}, args.format)
        return EXIT_INFEASIBLE
    wall = time.perf_counter() - t0
    out = {"subset": list(sol.subset), "value": sol.value, "slacks": list(sol.slacks),
           "feasible": sol.feasible, **extra}
    if args.oracle:
        rep = brute_force_opt(inst)
        out["optimum"] = rep.value
        out["oracle_ratio"] = _ratio(sol.value, rep.value)
    out["record"] = {"subcommand": f"solve {args.algorithm}", "digest": digest, "epsilon": args.epsilon,
                     "seed": args.seed}
    print(f"time {wall:.3f}s", file=sys.stderr)
    _emit(out, args.format)
    return EXIT_OK if sol.feasible else EXIT_INFEASIBLE


def cmd_pareto(args) -> int:
    data, _ = _read(args.input)
    inst = instance_from_dict(data)
    maxima, minima = multiobj.linear_objectives(inst)
    t0 = time.perf_counter()
    front = multiobj.pareto_opt(inst, maxima, minima if len(minima) else None, args.epsilon, _budget(args))
    print(f"time {time.perf_counter() - t0:.3f}s solves {front.solves}", file=sys.stderr)
    if not args.oracle:
        _emit(front.to_json(), args.format)
        return EXIT_OK
    pts = brute_force_pareto(inst, maxima, minima if len(minima) else None)
    missed = [list(p.subset) for p in pts if not multiobj.covers(front, p.maxima, p.minima, args.epsilon)]
    _emit({"frontier": front.to_json(), "oracle_points": len(pts), "uncovered": missed}, args.format)
    return EXIT_OK


def cmd_oracle(args) -> int:
    data, _ = _read(args.input)
    inst = instance_from_dict(data)
    if args.pareto:
        maxima, minima = multiobj.linear_objectives(inst)
        pts = brute_force_pareto(inst, maxima, minima if len(minima) else None)
        _emit([p.to_json() for p in pts], args.format)
        return EXIT_OK
    rep = brute_force_opt(inst)
    _emit(rep.to_json(), args.format)
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def bench_rows(suite: str, count: int, eps: float, seed: int, budget: FactorizeBudget,
               backend: str = "exact") -> list:
    rows = []
    for i in range(count):
        t0 = time.perf_counter()
        if suite == "factorize":
            pl = planted_factor(i, seed)
            f = cp_factorize(pl.Q, pl.U.shape[1], budget)
            row = {"index": i, "n": pl.U.shape[0], "r": pl.U.shape[1], "found": bool(f),
                   "residual": f.residual if f else f.best_residual}
            if f:
                s = shift_factorization(pl.Q, f, 1e-4)
                row.update(dominates=s.dominates, shift_residual=s.residual)
            rows.append(row)
            continue
        inst = suite_instance(suite, i, seed)
        base = {"index": i, "n": inst.n, "m": inst.m, "rank": [c.rank for c in inst.constraints]}
        if suite == "pareto":
            mx, mn = pareto_objectives(inst)
            front = multiobj.pareto_opt(inst, mx, mn, eps, budget)
            pts = brute_force_pareto(inst, mx, mn)
            miss = sum(not multiobj.covers(front, p.maxima, p.minima, eps) for p in pts)
            rows.append({**base, "frontier": len(front.solutions), "oracle_points": len(pts),
                         "uncovered": miss, "solves": front.solves})
        else:
            args = argparse.Namespace(epsilon=eps, backend=backend, objective_linear_geometric=False,
                                      restarts=budget.max_restarts, iterations=budget.max_iterations,
                                      delta=budget.delta, seed=budget.seed)
            sol, extra = _run_solver(suite, inst, args)
            opt = brute_force_opt(inst).value
            row = {**base, "value": sol.value, "optimum": opt, "ratio": _ratio(sol.value, opt),
                   "feasible": sol.feasible}
            if "bound" in extra:
                row["bound"] = extra["bound"]
            rows.append(row)
        print(f"{suite} {i} time {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    return rows


def cmd_bench(args) -> int:
    eps = args.epsilon if args.epsilon is not None else (0.02 if args.suite == "cover-lin" else 0.25)
    rows = bench_rows(args.suite, args.count, eps, args.seed, _budget(args), args.backend)
    _emit(rows, args.format)
    return EXIT_OK


# Parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--verbose", action="store_true")
    fac = argparse.ArgumentParser(add_help=False)
    fac.add_argument("--delta", type=float, default=1e-8)
    fac.add_argument("--restarts", type=int, default=64)
    fac.add_argument("--iterations", type=int, default=400)

    p = argparse.ArgumentParser(prog="cpquad", description="Binary quadratic programs with low cp-rank constraints.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a seeded random instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, default=1)
    g.add_argument("--rank", default="1", help="rank, or comma-separated ranks per constraint")
    g.add_argument("--sense", choices=("pack", "cover"), default="pack")
    g.add_argument("--objective", choices=("linear", "coverage", "quadratic", "product", "sum_ratio"),
                   default="linear")
    g.add_argument("--n-objectives", type=int, default=2)
    g.add_argument("--objective-rank", type=int, default=1)
    g.add_argument("--linear-term", action="store_true")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("factorize", parents=[common, fac], help="nonnegative factorization of Q")
    f.add_argument("--input", required=True)
    f.add_argument("--rank", type=int)
    f.add_argument("--shift", type=float, help="apply the dominance shift with this tolerance")
    f.set_defaults(func=cmd_factorize)

    s = sub.add_parser("solve", parents=[common, fac], help="run one approximation scheme")
    s.add_argument("algorithm", choices=SOLVERS)
    s.add_argument("--input", required=True)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--oracle", action="store_true")
    s.add_argument("--backend", choices=("exact", "greedy-enum"), default="exact")
    s.add_argument("--objective-linear-geometric", action="store_true")
    s.set_defaults(func=cmd_solve)

    pa = sub.add_parser("pareto", parents=[common, fac], help="approximate Pareto set")
    pa.add_argument("--input", required=True)
    pa.add_argument("--epsilon", type=float, default=0.25)
    pa.add_argument("--oracle", action="store_true")
    pa.set_defaults(func=cmd_pareto)

    o = sub.add_parser("oracle", parents=[common], help="exhaustive optimum or Pareto frontier")
    o.add_argument("--input", required=True)
    o.add_argument("--pareto", action="store_true")
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", parents=[common, fac], help="ratio table over a seeded suite")
    b.add_argument("--suite", choices=SUITES, required=True)
    b.add_argument("--count", type=int, default=10)
    b.add_argument("--epsilon", type=float)
    b.add_argument("--backend", choices=("exact", "greedy-enum"), default="exact")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    set_threads(args.threads)
    try:
        return args.func(args)
    except (ValueError, RankError, OSError, packsub.BackendError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        set_threads(1)


if __name__ == "__main__":
    sys.exit(main())
