"""Command line entry point.

    lampembed tsp --family cycle --n 6 --start 0 --targets 2,4 --end 0
    lampembed embed --family cycle --n 8 --embedder karp --lamps 1,5 --pos 3
    lampembed distortion --family grid --n 4 --d 2 --samples 200 --seed 42
    lampembed freespace --family cycle --n 4 --embedder karp --pairs 500
    lampembed fold --n 4 --d 2 --pairs 500
    lampembed suite configs/smoke.json --out report.json

Exit status: 0 when every check passes, 1 on an invariant violation,
2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import EMBEDDERS, ExperimentConfig, load_suite, run, write_report
from .generators import FAMILIES, generate
from .lifting import embed_lamplighter_l1
from .metric import MetricError, shortest_path_metric
from .tsp import CapExceeded, LamplighterPoint, lamplighter_bfs_oracle, tau

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


def _ints(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _common(p: argparse.ArgumentParser, with_pairs: bool = True) -> None:
    p.add_argument("--family", choices=FAMILIES, default="cycle")
    p.add_argument("--n", type=int, default=None, help="size, or grid side")
    p.add_argument("--d", type=int, default=None, help="grid or lattice dimension")
    p.add_argument("--k", type=int, default=None, help="diamond level, chord count, or coarse levels")
    p.add_argument("--path", default=None, help="graph file for --family file")
    p.add_argument("--embedder", choices=EMBEDDERS, default="frt")
    p.add_argument("--samples", type=int, default=200, help="FRT trees")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=20, help="largest exact TSP instance")
    if with_pairs:
        p.add_argument("--pairs", type=int, default=200, help="sampled pairs or molecules")
        p.add_argument("--policy", choices=("sampled", "exhaustive"), default="sampled")
        p.add_argument("--max-symmdiff", type=int, default=4)
        p.add_argument("--max-lamps", type=int, default=2)
        p.add_argument("--out", default="-", help="report path ('-' for stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--timing", action="store_true", help="add wall-clock runtimes (breaks byte reproducibility)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lampembed", description="L1 embeddings of lamplighter metrics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tsp", help="exact travelling-salesman / lamplighter distances")
    _common(p, with_pairs=False)
    p.add_argument("--start", type=int, required=True)
    p.add_argument("--targets", type=_ints, default=[])
    p.add_argument("--end", type=int, default=None, help="defaults to --start")
    p.add_argument("--bfs", action="store_true", help="cross-check against BFS on the lamplighter graph")

    p = sub.add_parser("embed", help="print the L1 image of one lamplighter point")
    _common(p, with_pairs=False)
    p.add_argument("--lamps", type=_ints, default=[])
    p.add_argument("--pos", type=int, default=0)

    for name, suite, text in (
        ("distortion", "core", "stretch, domination and pipeline distortion"),
        ("freespace", "freespace", "free-space norms of random molecules"),
        ("fold", "fold", "folding checks on the lattice"),
        ("coarse", "coarse", "truncated coarse embedding bounds"),
    ):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.set_defaults(suite=suite)

    p = sub.add_parser("suite", help="run a JSON suite file")
    p.add_argument("config")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def _params(args) -> dict:
    return {k: getattr(args, k) for k in ("n", "d", "k", "path") if getattr(args, k) is not None}


def _cmd_tsp(args) -> int:
    g = generate(args.family, _params(args), args.seed)
    m = shortest_path_metric(g)
    end = args.start if args.end is None else args.end
    u = LamplighterPoint((), args.start)
    v = LamplighterPoint(args.targets, end)
    for p in (u, v):
        p.check(m.n)
    value = tau(m, u, v, args.cap)
    out = {"tsp": value, "lamplighter": value + len(args.targets)}
    if args.bfs:
        out["bfs"] = lamplighter_bfs_oracle(g, u, v)
    print(json.dumps(out))
    if args.bfs and out["bfs"] != out["lamplighter"]:
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_embed(args) -> int:
    from .experiments import build_embedding

    cfg = ExperimentConfig(family=args.family, n=args.n, d=args.d, k=args.k, path=args.path,
                           embedder=args.embedder, samples=args.samples, seed=args.seed)
    g = generate(cfg.family, cfg.params, cfg.seed)
    m = shortest_path_metric(g)
    p = LamplighterPoint(args.lamps, args.pos)
    p.check(m.n)
    vec = embed_lamplighter_l1(build_embedding(cfg, g, m), p)
    coords = sorted((repr(k), v) for k, v in vec.items())
    print(json.dumps({"norm1": vec.norm1(), "coords": dict(coords)}, indent=1))
    return EXIT_OK


def _emit(rows: list[dict], out: str, fmt: str) -> int:
    text = write_report(rows, out, fmt)
    if out == "-":
        sys.stdout.write(text)
    failed = [r for r in rows if not r.get("passed", True)]
    for r in failed:
        print(f"violation: {json.dumps(r, default=str)}", file=sys.stderr)
    return EXIT_VIOLATION if failed else EXIT_OK


def _cmd_suite_like(args) -> int:
    cfg = ExperimentConfig(
        family=args.family, n=args.n, d=args.d, k=args.k, path=args.path, embedder=args.embedder,
        samples=args.samples, seed=args.seed, pair_policy=args.policy, pairs=args.pairs,
        max_symmdiff=args.max_symmdiff, max_lamps=args.max_lamps, cap=args.cap,
        suites=(args.suite,), timing=args.timing,
    )
    return _emit(run(cfg), args.out, args.format)


def _cmd_suite(args) -> int:
    rows = []
    for cfg in load_suite(args.config):
        rows.extend(run(cfg))
    return _emit(rows, args.out, args.format)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "tsp":
            return _cmd_tsp(args)
        if args.command == "embed":
            return _cmd_embed(args)
        if args.command == "suite":
            return _cmd_suite(args)
        return _cmd_suite_like(args)
    except (MetricError, CapExceeded) as exc:
        print(f"lampembed: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
