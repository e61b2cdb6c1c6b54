"""Command-line front end: ``synth feasible|optimal|enumerate|compare``.

Exit codes: 0 when a realization is found, 1 when the problem is
unsatisfiable, 2 on input errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .cex import dump_ce
from .checker import DEFAULT_TOL, ConvergenceError
from .expr import ParseError
from .lang import parse_goal, parse_properties, parse_sketch, realization_cost
from .synth import (InstanceCache, SynthConfig, enumerate_baseline, synthesize_feasible,
                    synthesize_optimal, verify, with_oob)

EXIT_SAT, EXIT_UNSAT, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as err:
        raise InputError(f"cannot read {path}: {err.strerror or err}") from None


def _load(args):
    try:
        sketch = parse_sketch(_read(args.sketch))
    except ParseError as err:
        raise InputError(f"{args.sketch}:{err.line}:{err.col}: {err.message}") from None
    props = []
    if getattr(args, "props", None):
        try:
            props = parse_properties(_read(args.props), sketch)
        except ParseError as err:
            raise InputError(f"{args.props}:{err.line}:{err.col}: {err.message}") from None
    if args.budget is not None and args.budget < 0:
        raise InputError("budget must be non-negative")
    return sketch, props


def _goal(sketch, text: str):
    try:
        return parse_goal(text, sketch)
    except ParseError as err:
        raise InputError(f"bad goal {text!r}: {err.message}") from None


def _config(args) -> SynthConfig:
    if args.tol <= 0:
        raise InputError("tolerance must be positive")
    if args.max_ces < 1:
        raise InputError("--max-ces must be at least 1")
    return SynthConfig(tol=args.tol, max_ces=args.max_ces)


def _report(sketch, props, r, config, out) -> None:
    print(f"witness: {sketch.describe(r)}", file=out)
    print(f"cost: {realization_cost(sketch, r)}", file=out)
    verdict = verify(sketch, r, with_oob(props), config)
    for prop, value in zip(props, verdict.values):
        print(f"  {prop} : {value:.6g}", file=out)


def _write_stats(args, stats, sketch) -> None:
    if args.stats:
        Path(args.stats).write_text(json.dumps(stats.to_json(sketch), indent=2) + "\n")


def _dump_conflicts(args, sketch, props, stats) -> None:
    # replay the visited realizations and print their counterexamples
    if not args.dump_ce:
        return
    config = _config(args)
    spec = with_oob(props)
    for r in stats.visited:
        verdict = verify(sketch, r, spec, config)
        for ce in verdict.ces:
            print(dump_ce(sketch, r, ce), file=sys.stderr)


def cmd_feasible(args, out=None) -> int:
    out = out or sys.stdout
    sketch, props = _load(args)
    config = _config(args)
    r, stats = synthesize_feasible(sketch, props, args.budget, config)
    _dump_conflicts(args, sketch, props, stats)
    _write_stats(args, stats, sketch)
    if r is None:
        print("UNSAT", file=out)
        return EXIT_UNSAT
    print("SAT", file=out)
    _report(sketch, props, r, config, out)
    return EXIT_SAT


def cmd_optimal(args, out=None) -> int:
    out = out or sys.stdout
    sketch, props = _load(args)
    config = _config(args)
    if not 0 < args.eps < 1:
        raise InputError("--eps must lie strictly between 0 and 1")
    goal = _goal(sketch, args.goal)
    r, stats = synthesize_optimal(sketch, props, goal, args.budget, args.eps, args.mode, config)
    _dump_conflicts(args, sketch, props, stats)
    _write_stats(args, stats, sketch)
    if r is None:
        print("UNSAT", file=out)
        return EXIT_UNSAT
    print("SAT", file=out)
    print(f"value: {stats.value:.6g}", file=out)
    _report(sketch, props, r, config, out)
    return EXIT_SAT


def cmd_enumerate(args, out=None) -> int:
    out = out or sys.stdout
    sketch, props = _load(args)
    goal = _goal(sketch, args.goal) if args.goal else None
    result = enumerate_baseline(sketch, props, args.budget, goal, args.mode, args.tol)
    writer = csv.writer(out, lineterminator="\n")
    header = ["realization", "cost"] + [str(p) for p in with_oob(props)] + ["feasible"]
    if goal is not None:
        header.append("objective")
    writer.writerow(header)
    for i, row in enumerate(result.rows):
        if args.limit is not None and i >= args.limit:
            print(f"# truncated after {args.limit} of {len(result.rows)} rows", file=out)
            break
        values = [f"{v:.10g}" for v in row.values] or [row.error] * (len(props) + 1)
        line = [sketch.describe(row.realization), row.cost] + values + [int(row.feasible)]
        if goal is not None:
            line.append("" if row.objective is None else f"{row.objective:.10g}")
        writer.writerow(line)
    print(result.result, file=sys.stderr)
    return EXIT_SAT if result.result == "SAT" else EXIT_UNSAT


def cmd_compare(args, out=None) -> int:
    out = out or sys.stdout
    sketch, props = _load(args)
    config = _config(args)
    instances = InstanceCache(sketch)
    goal = _goal(sketch, args.goal) if args.goal else None
    if goal is None:
        r, stats = synthesize_feasible(sketch, props, args.budget, config, instances)
    else:
        if not 0 < args.eps < 1:
            raise InputError("--eps must lie strictly between 0 and 1")
        r, stats = synthesize_optimal(sketch, props, goal, args.budget, args.eps, args.mode,
                                      config, instances)
    base = enumerate_baseline(sketch, props, args.budget, goal, args.mode, args.tol)
    report = {
        "cegis": stats.to_json(sketch),
        "baseline": {
            "result": base.result,
            "iterations": base.checked,
            "value": base.value,
            "wall_ms": round(base.wall_ms, 3),
        },
        "conflict_size_histogram": stats.size_histogram(),
        "hole_frequency": {h: stats.hole_frequency().get(h, 0) for h in sketch.hole_names},
        "holes": len(sketch.hole_names),
    }
    _write_stats(args, stats, sketch)
    print(json.dumps(report, indent=2), file=out)
    return EXIT_SAT if stats.result == "SAT" else EXIT_UNSAT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synth", description="Synthesis of probabilistic program sketches.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, props_required=True):
        p.add_argument("-s", "--sketch", required=True, help="sketch file")
        p.add_argument("-p", "--props", required=props_required, help="property file")
        p.add_argument("-b", "--budget", type=int, default=None, help="cost budget")
        p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="value iteration tolerance")
        p.add_argument("--max-ces", type=int, default=8, help="counterexamples per violated property")
        p.add_argument("--stats", help="write run statistics as JSON")
        p.add_argument("--dump-ce", action="store_true", help="print counterexamples to stderr")
        p.add_argument("--mode", choices=("max", "min"), default="max",
                       help="direction of the objective (default max)")

    p = sub.add_parser("feasible", help="find any satisfying realization")
    common(p)
    p.set_defaults(func=cmd_feasible)

    p = sub.add_parser("optimal", help="optimize the probability of reaching a goal")
    common(p, props_required=False)
    p.add_argument("--goal", required=True, help="goal predicate, e.g. \"s=3\"")
    p.add_argument("--eps", type=float, default=0.05, help="relative optimality gap in [0, 1)")
    p.set_defaults(func=cmd_optimal)

    p = sub.add_parser("enumerate", help="check every realization (baseline)")
    common(p, props_required=False)
    p.add_argument("--goal", help="also report the reachability value of this goal")
    p.add_argument("--limit", type=int, default=None, help="print at most this many rows")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("compare", help="run synthesis and baseline, print JSON")
    common(p, props_required=False)
    p.add_argument("--goal", help="optimize this goal instead of checking feasibility")
    p.add_argument("--eps", type=float, default=0.05, help="relative optimality gap in [0, 1)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_SAT
    try:
        return args.func(args)
    except (InputError, ValueError, ConvergenceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
