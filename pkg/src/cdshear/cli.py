"""Command-line front end.

    cdshear solve   PROBLEM [--seed N] [--out DIR] [--grid-scale K]
    cdshear check   PROBLEM
    cdshear analyze PROBLEM [--seed N] [--out DIR]

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 I/O failure.
"""
import argparse
import json
import os
import sys

from .errors import SolverError, ValidationError
from .problem import analyze, build_problem, load_spec, solve, write_outputs

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _parser():
    p = argparse.ArgumentParser(prog="cdshear", description="Canonical dual solver for anti-plane shear problems.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("solve", "run the full pipeline and write the report and field CSVs"),
        ("check", "validate the problem file only"),
        ("analyze", "run the convexity analyses only"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("spec", metavar="PROBLEM", help="problem file (JSON)")
        s.add_argument("--seed", type=int, default=None, help="override run.oracle.seed")
        s.add_argument("--out", default=None, help="override output.dir")
        s.add_argument("--grid-scale", type=int, default=None, metavar="K", help="refine the grid: n -> K*(n-1)+1 nodes per axis")
    return p


def _run(args):
    spec = load_spec(args.spec).with_overrides(seed=args.seed, out=args.out, grid_scale=args.grid_scale)
    if args.command == "check":
        print(f"ok: {args.spec}")
        return EXIT_OK
    out_dir = spec.data["output"]["dir"]
    if args.command == "analyze":
        dom, m, meas, stress, _ = build_problem(spec)
        res = analyze(spec, dom, m, meas, stress)
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "analysis.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(res, fh, indent=2, sort_keys=True, default=lambda o: o.tolist())
            fh.write("\n")
        print(path)
        return EXIT_OK
    report, fields, dom, stress = solve(spec)
    for p in write_outputs(report, fields, dom, stress):
        print(p)
    for b in report["branches"]:
        print(f"branch {b['branch_id']}: Pi={b['Pi_primal']} Pi_dual={b['Pi_dual']} labels={b['labels']}")
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
