"""Command-line entry point.

JSON results go to stdout for machine use; human-readable notes go to
stderr.  Exit code 0 iff all requested checks pass.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness, lpcheck
from .distributions import instance_from_json, instance_to_json
from .dp import solve_bellman
from .ode import YSolution, solve_theta
from .phi import build_tables
from .reductions import discretize, monotonize, split_to_bernoulli


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--json", action="store_true", help="machine-readable stdout (default)")


def _emit(obj, out: str | None):
    text = json.dumps(obj)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="buyback-lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute the optimal competitive ratio for f")
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--grid", type=int, default=4096)
    _add_common(p)

    p = sub.add_parser("phi-dump", help="dump t, phi, G columns from a solved curve")
    p.add_argument("--sol", type=str, required=True)
    _add_common(p)

    p = sub.add_parser("gen", help="generate a named instance")
    p.add_argument(
        "--family",
        required=True,
        choices=["two", "three", "indiff", "jitter-indiff", "multistage", "gpd", "bounded"],
    )
    p.add_argument("--f", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    _add_common(p)

    p = sub.add_parser("dp", help="solve the exact value table of a discrete instance")
    p.add_argument("--instance", type=str, required=True)
    p.add_argument("--f", type=float, required=True)
    _add_common(p)

    p = sub.add_parser("reduce", help="discretize + split + monotonize an instance")
    p.add_argument("--instance", type=str, required=True)
    p.add_argument("--delta", type=float, default=0.01)
    _add_common(p)

    p = sub.add_parser("lpcheck", help="build the dual flow and check feasibility")
    p.add_argument("--sol", type=str, required=True)
    p.add_argument("--q", type=str, required=True, help="JSON file with a list of probabilities")
    p.add_argument("--theta", type=str, default="auto")
    p.add_argument("--report", type=str, default=None)
    _add_common(p)

    p = sub.add_parser("simulate", help="run the Monte Carlo experiment")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--family", type=str, default=None)
    p.add_argument("--f", type=str, default=None, help="comma-separated f grid")
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--policies", type=str, default=None)
    p.add_argument("--alpha", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="sub-minute subset")
    _add_common(p)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code != 2 else 2

    if args.command == "solve":
        sol = solve_theta(args.f, tol_theta=args.tol, grid_n=args.grid)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(sol.to_json())
        print(json.dumps({"f": args.f, "theta": sol.theta, "y1": sol.y1}))
        return 0

    if args.command == "phi-dump":
        with open(args.sol) as fh:
            sol = YSolution.from_json(fh.read())
        tables = build_tables(sol)
        lines = ["t,phi,G"]
        for t in np.geomspace(1e-6, 1.0, 2048):
            g = tables.g_cdf(min(float(t), tables.k1)) if t > 0 else 0.0
            lines.append(f"{t:.10g},{tables.phi(float(t)):.10g},{g:.10g}")
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0

    if args.command == "gen":
        rng = np.random.default_rng(args.seed)
        inst = harness.generate_instance(args.family, args.f, rng, args.alpha)
        text = instance_to_json(inst)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        print(text)
        return 0

    if args.command == "dp":
        with open(args.instance) as fh:
            inst = instance_from_json(fh.read())
        table = solve_bellman(inst, args.f)
        if args.out:
            with open(args.out, "w") as fh:
                json.dump(
                    {
                        "f": args.f,
                        "states": table.states.tolist(),
                        "values": table.values.tolist(),
                    },
                    fh,
                )
        print(json.dumps({"phi00": table.values[0, 0]}))
        return 0

    if args.command == "reduce":
        with open(args.instance) as fh:
            inst = instance_from_json(fh.read())
        out = monotonize(split_to_bernoulli(discretize(inst, args.delta)))
        text = instance_to_json(out)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        print(text)
        return 0

    if args.command == "lpcheck":
        with open(args.sol) as fh:
            sol = YSolution.from_json(fh.read())
        tables = build_tables(sol)
        with open(args.q) as fh:
            q = json.load(fh)
        theta = tables.theta - 1e-4 if args.theta == "auto" else float(args.theta)
        dual = lpcheck.build_dual_solution(tables, q)
        violation = lpcheck.check_feasibility(dual, theta)
        obj = {
            "f": tables.f,
            "theta": theta,
            "max_violation": violation,
            "feasible": bool(violation <= 1e-5),
        }
        _emit(obj, args.report or args.out)
        return 0 if obj["feasible"] else 1

    if args.command == "simulate":
        cfg = harness.SimConfig.from_file(args.config) if args.config else harness.SimConfig()
        updates = {}
        if args.family:
            updates["family"] = args.family
        if args.f:
            updates["f_values"] = tuple(float(x) for x in args.f.split(","))
        if args.instances is not None:
            updates["n_instances"] = args.instances
        if args.reps is not None:
            updates["n_reps"] = args.reps
        if args.policies:
            updates["policies"] = tuple(p.strip() for p in args.policies.split(","))
        if args.alpha is not None:
            updates["alpha"] = args.alpha
        if args.out:
            updates["out"] = args.out
        if args.seed is not None:
            updates["seed"] = args.seed
        from dataclasses import replace

        cfg = replace(cfg, **updates)
        report = harness.experiment(cfg)
        if not cfg.out:
            sys.stdout.write(report.to_csv())
        else:
            print(json.dumps({"rows": len(report.rows), "out": cfg.out}))
        return 0

    if args.command == "verify":
        from .acceptance import run_acceptance

        results = run_acceptance(quick=args.quick)
        for res in results:
            status = "PASS" if res.passed else "FAIL"
            print(f"[{status}] {res.name}: {res.detail} ({res.seconds:.1f}s)", file=sys.stderr)
        summary = {
            "passed": sum(r.passed for r in results),
            "failed": sum(not r.passed for r in results),
        }
        print(json.dumps(summary))
        return 0 if summary["failed"] == 0 else 1

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
