"""Shared oracles, built straight from the definitions, and the acceptance summary hook."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from lampembed.metric import WeightedGraph
from lampembed.stochastic import make_rng
from lampembed.trees import WeightedTree

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def brute_tsp(d, x, targets, y) -> float:
    """Shortest x -> y route through ``targets`` by trying every visiting order."""
    stops = [t for t in set(targets) if t not in (x, y)]
    best = math.inf
    for order in itertools.permutations(stops):
        route = (x, *order, y)
        best = min(best, sum(d[a][b] for a, b in zip(route, route[1:])))
    return best


def floyd_warshall(g: WeightedGraph) -> np.ndarray:
    d = np.full((g.n, g.n), np.inf)
    np.fill_diagonal(d, 0.0)
    for u, v, w in g.edges:
        d[u, v] = min(d[u, v], w)
        d[v, u] = min(d[v, u], w)
    for k in range(g.n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    return d


def tree_path_children(t: WeightedTree, x: int, y: int) -> set[int]:
    """Child endpoints of the edges on the x-y path, by walking to the root from both ends."""
    up_x, v = [], x
    while v != -1:
        up_x.append(v)
        v = t.parent[v]
    up_y, v = [], y
    while v != -1:
        up_y.append(v)
        v = t.parent[v]
    common = set(up_x) & set(up_y)
    return {v for v in up_x if v not in common} | {v for v in up_y if v not in common}


def naive_lamp_groups(t: WeightedTree, x: int, lamps) -> dict[int, frozenset]:
    """``A_{x,e} = {a in A : e in [x, a]}`` for every edge, straight from the definition."""
    out = {}
    for c in range(t.n):
        if t.parent[c] == -1:
            continue
        group = frozenset(a for a in lamps if c in tree_path_children(t, x, a))
        if group:
            out[c] = group
    return out


def random_weighted_tree(n: int, rng, low: float = 0.5, high: float = 4.0) -> WeightedTree:
    parent = [-1] + [int(rng.integers(0, i)) for i in range(1, n)]
    weight = [0.0] + [float(rng.uniform(low, high)) for _ in range(1, n)]
    return WeightedTree(tuple(parent), tuple(weight))


def random_subset(rng, n: int, size: int) -> frozenset:
    return frozenset(int(a) for a in rng.choice(n, size=min(size, n), replace=False))


@pytest.fixture
def rng():
    return make_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
