"""``triadlab`` command line.

Exit codes: 0 success, 1 tolerance or verification failure, 2 usage or spec
error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import GraphError, InvalidSpec, TriadLabError
from .rng import SEED_ENV, resolve_seed

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


def _uint64(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _count(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _seed(args) -> int:
    seed = resolve_seed(args.seed)
    if seed is None:
        raise UsageError(f"--seed is required (or set {SEED_ENV})")
    return seed


def _load(path: str):
    from .generators import load_spec

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidSpec(f"cannot read spec {path}: {exc.strerror}") from exc
    try:
        return load_spec(text)
    except GraphError as exc:
        raise InvalidSpec(str(exc)) from exc


def _fmt_set(nodes) -> str:
    return "{" + ", ".join(str(v) for v in sorted(nodes)) + "}"


def cmd_analyze(args) -> int:
    from .graph import condorcet_winner, generalized_median, theta_decomposition

    g, p = _load(args.spec)
    median = g.is_median
    nodes, cost = generalized_median(g, p)
    cw = condorcet_winner(g, {v: int(c) for v, c in enumerate(p.counts) if c})
    print(f"median_graph: {'true' if median else 'false'}")
    print(f"nodes: {g.node_count}")
    print(f"edges: {g.edge_count}")
    print(f"theta_classes: {len(theta_decomposition(g)) if median else 'n/a'}")
    print(f"participants: {p.n}")
    print(f"generalized_median: {_fmt_set(nodes)}")
    print(f"median_cost: {cost}")
    print(f"condorcet_winner: {'none' if cw is None else cw}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .analytics import ExperimentConfig, run_experiment
    from .generators import parse_spec

    seed = _seed(args)
    g, p = _load(args.spec)
    spec = parse_spec(json.loads(Path(args.spec).read_text()))
    config = ExperimentConfig(spec, args.dynamic, args.tokens, args.trials, args.cap)
    report = run_experiment(config, seed, threads=args.threads, graph=(g, p))
    text = report.to_csv() if args.format == "csv" else report.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_tmr(args) -> int:
    from .rng import make_rng
    from .tmr import run_tmr_round, truthful_strategy

    seed = _seed(args)
    g, _ = _load(args.spec)
    if any(not 0 <= v < g.node_count for v in args.group):
        raise UsageError(f"group nodes must lie in [0, {g.node_count})")
    result = run_tmr_round(
        g, args.group, [truthful_strategy()] * 3, rng=make_rng(seed), step_cap=args.cap or 1000
    )
    out = {"winner": result.winner, "steps": result.steps, "transcript": result.transcript}
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .analytics import absorption_solver, urn_closed_form

    n = args.n
    starts = [args.x0] if args.x0 is not None else list(range(n + 1))
    if any(not 0 <= x <= n for x in starts):
        raise UsageError(f"start state must lie in [0, {n}]")
    solved = absorption_solver(n)
    rows = [
        {
            "x0": x,
            "closed_form": urn_closed_form(n, x),
            "solver": solved.hit(x),
            "expected_time": float(solved.expected_time[x]),
        }
        for x in starts
    ]
    if args.format == "csv":
        print("x0,closed_form,solver,expected_time")
        for r in rows:
            print(f"{r['x0']},{r['closed_form']!r},{r['solver']!r},{r['expected_time']!r}")
    else:
        print(json.dumps({"n": n, "rows": rows}, indent=2))
    return EXIT_OK


def cmd_reproduce(args) -> int:
    from .reproduce import all_passed, names, reproduce

    if args.name not in names():
        raise UsageError(f"unknown reproduction {args.name!r}; choose from {', '.join(names())}")
    checks = reproduce(args.name, threads=args.threads)
    for c in checks:
        print(c.line())
    ok = all_passed(checks)
    print(f"{args.name}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    from .verify import run_suites

    seed = resolve_seed(args.seed)
    results = run_suites(args.level, 0 if seed is None else seed)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} properties passed")
    return EXIT_OK if failed == 0 else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    from .dynamics import DYNAMICS

    parser = argparse.ArgumentParser(prog="triadlab", description="Small-group consensus on median graphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="describe a graph and profile")
    a.add_argument("--spec", required=True, metavar="PATH")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="run seeded trials of a dynamic")
    s.add_argument("--spec", required=True, metavar="PATH")
    s.add_argument("--dynamic", required=True, choices=sorted(DYNAMICS))
    s.add_argument("--tokens", type=_positive, default=1)
    s.add_argument("--trials", type=_count, default=100)
    s.add_argument("--seed", type=_uint64)
    s.add_argument("--cap", type=_positive)
    s.add_argument("--out", metavar="PATH")
    s.add_argument("--format", choices=("csv", "json"), default="json")
    s.add_argument("--threads", type=_positive)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("tmr", help="play one truthful bargaining round")
    t.add_argument("--spec", required=True, metavar="PATH")
    t.add_argument("group", nargs=3, type=int, metavar="NODE")
    t.add_argument("--seed", type=_uint64)
    t.add_argument("--cap", type=_positive)
    t.add_argument("--out", metavar="PATH")
    t.set_defaults(func=cmd_tmr)

    o = sub.add_parser("oracle", help="urn absorption probabilities, closed form vs solver")
    o.add_argument("n", type=_positive)
    o.add_argument("x0", type=int, nargs="?")
    o.add_argument("--format", choices=("csv", "json"), default="json")
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("reproduce", help="run a registered reproduction")
    r.add_argument("name")
    r.add_argument("--threads", type=_positive)
    r.set_defaults(func=cmd_reproduce)

    v = sub.add_parser("verify", help="run the invariant suites")
    v.add_argument("--level", choices=("quick", "full"), default="quick")
    v.add_argument("--seed", type=_uint64)
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"triadlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidSpec as exc:
        print(f"triadlab: spec error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"triadlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TriadLabError as exc:
        print(f"triadlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
