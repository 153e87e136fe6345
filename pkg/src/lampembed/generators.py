"""Unit-weight graph families used by the experiments, and the graph file format."""

from __future__ import annotations

import itertools
from pathlib import Path
from typing import Sequence

from .metric import MetricError, WeightedGraph

FAMILIES = ("path", "cycle", "grid", "torus", "diamond", "random_tree", "random_graph", "complete", "file")
MAX_DIAMOND_LEVEL = 5


def path_graph(n: int) -> WeightedGraph:
    if n < 1:
        raise MetricError("path needs n >= 1")
    return WeightedGraph(n, tuple((i, i + 1, 1.0) for i in range(n - 1)))


def cycle_graph(n: int) -> WeightedGraph:
    if n < 3:
        raise MetricError("cycle needs n >= 3")
    return WeightedGraph(n, tuple((i, (i + 1) % n, 1.0) for i in range(n)))


def complete_graph(n: int) -> WeightedGraph:
    if n < 1:
        raise MetricError("complete graph needs n >= 1")
    return WeightedGraph(n, tuple((i, j, 1.0) for i, j in itertools.combinations(range(n), 2)))


def grid_index(coords: Sequence[int], width: int | Sequence[int]) -> int:
    """Row-major index of ``coords`` in a grid of the given side(s)."""
    shape = [width] * len(coords) if isinstance(width, int) else list(width)
    idx = 0
    for c, s in zip(coords, shape):
        if not 0 <= c < s:
            raise MetricError(f"coordinate {tuple(coords)} outside grid {tuple(shape)}")
        idx = idx * s + c
    return idx


def grid_coords(shape: Sequence[int]) -> list[tuple[int, ...]]:
    return list(itertools.product(*(range(s) for s in shape)))


def grid_graph(shape: Sequence[int], periodic: bool = False) -> WeightedGraph:
    """Product of paths (or cycles when ``periodic``) with the given side lengths."""
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise MetricError(f"invalid grid shape {shape}")
    if periodic and any(s < 3 for s in shape):
        raise MetricError("torus sides must be at least 3")
    edges = []
    for c in grid_coords(shape):
        u = grid_index(c, shape)
        for axis, s in enumerate(shape):
            nxt = list(c)
            if c[axis] + 1 < s:
                nxt[axis] += 1
            elif periodic:
                nxt[axis] = 0
            else:
                continue
            edges.append((u, grid_index(nxt, shape), 1.0))
    n = 1
    for s in shape:
        n *= s
    return WeightedGraph(n, tuple(edges))


def diamond_graph(level: int) -> WeightedGraph:
    """Diamond ``D_k``: start from one edge and replace every edge by a 4-cycle ``k`` times."""
    if not 0 <= level <= MAX_DIAMOND_LEVEL:
        raise MetricError(f"diamond level must be in 0..{MAX_DIAMOND_LEVEL}")
    n = 2
    edges = [(0, 1)]
    for _ in range(level):
        new = []
        for s, t in edges:
            a, b = n, n + 1
            n += 2
            new += [(s, a), (a, t), (s, b), (b, t)]
        edges = new
    return WeightedGraph(n, tuple((u, v, 1.0) for u, v in edges))


def random_tree_graph(n: int, rng, weighted: bool = False) -> WeightedGraph:
    """Random recursive tree: vertex ``i`` attaches to a uniform earlier vertex."""
    if n < 1:
        raise MetricError("tree needs n >= 1")
    edges = []
    for i in range(1, n):
        w = float(rng.uniform(0.5, 4.0)) if weighted else 1.0
        edges.append((int(rng.integers(0, i)), i, w))
    return WeightedGraph(n, tuple(edges))


def random_connected_graph(n: int, extra: int, rng) -> WeightedGraph:
    """Random recursive tree plus up to ``extra`` distinct random chords."""
    base = random_tree_graph(n, rng)
    have = {(min(u, v), max(u, v)) for u, v, _ in base.edges}
    free = [e for e in itertools.combinations(range(n), 2) if e not in have]
    extra = min(extra, len(free))
    pick = rng.choice(len(free), size=extra, replace=False) if extra else []
    chords = [(*free[int(i)], 1.0) for i in sorted(pick)]
    return WeightedGraph(n, base.edges + tuple(chords))


def read_graph(path: str | Path) -> WeightedGraph:
    """Parse ``n m`` followed by ``m`` lines ``u v w``."""
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise MetricError(f"{path}: missing 'n m' header")
    try:
        n, m = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise MetricError(f"{path}: bad header") from exc
    body = tokens[2:]
    if len(body) != 3 * m:
        raise MetricError(f"{path}: expected {m} edge lines, found {len(body) / 3:g}")
    edges = []
    for k in range(m):
        u, v, w = body[3 * k: 3 * k + 3]
        try:
            edges.append((int(u), int(v), float(w)))
        except ValueError as exc:
            raise MetricError(f"{path}: bad edge line {k + 1}: {u} {v} {w}") from exc
    return WeightedGraph(n, tuple(edges))


def write_graph(g: WeightedGraph, path: str | Path) -> None:
    lines = [f"{g.n} {len(g.edges)}"] + [f"{u} {v} {w!r}" for u, v, w in g.edges]
    Path(path).write_text("\n".join(lines) + "\n")


def generate(family: str, params: dict, seed: int = 0) -> WeightedGraph:
    """Build a graph of the named family.

    ``params`` keys: ``n`` (size or grid side), ``d`` (grid dimension),
    ``shape`` (explicit grid sides), ``k`` (diamond level or random-graph
    chord count), ``path`` (graph file).
    """
    from .stochastic import make_rng

    n = params.get("n")
    if family == "path":
        return path_graph(_need(n, "n"))
    if family == "cycle":
        return cycle_graph(_need(n, "n"))
    if family == "complete":
        return complete_graph(_need(n, "n"))
    if family in ("grid", "torus"):
        shape = params.get("shape") or (_need(n, "n"),) * int(params.get("d") or 2)
        return grid_graph(shape, periodic=family == "torus")
    if family == "diamond":
        return diamond_graph(_need(params.get("k"), "k"))
    if family == "random_tree":
        return random_tree_graph(_need(n, "n"), make_rng(seed, 0x7EE))
    if family == "random_graph":
        n = _need(n, "n")
        extra = params.get("k")
        return random_connected_graph(n, n if extra is None else int(extra), make_rng(seed, 0x6A4))
    if family == "file":
        return read_graph(_need(params.get("path"), "path"))
    raise MetricError(f"unknown graph family {family!r}; choose from {', '.join(FAMILIES)}")


def _need(value, name):
    if value is None:
        raise MetricError(f"missing parameter {name!r}")
    return value
