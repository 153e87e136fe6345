"""Weighted trees, sparse L1 vectors and the explicit L1 embedding of Ts(T).

Edges of a rooted tree are named by their child endpoint internally; the
public path/Steiner helpers return sorted vertex pairs.  For a lamplighter
point ``(A, x)`` and an edge ``e``, ``A_{x,e}`` is the set of lamps whose path
from ``x`` crosses ``e``.  The embedding puts weight ``w_e`` on the
coordinate ``(e, A_{x,e})`` for every edge with nonempty ``A_{x,e}`` and
``w_e`` on a per-edge coordinate for every edge between the root and ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .metric import MetricError, MetricSpace
from .tsp import LamplighterPoint

Edge = tuple[int, int]


# ----------------------------------------------------------------------------
# coordinate keys and sparse vectors
# ----------------------------------------------------------------------------


class TspCoord(NamedTuple):
    edge: int  # child endpoint
    members: tuple


class RootPathCoord(NamedTuple):
    edge: int


class LampCoord(NamedTuple):
    point: Hashable


class EdgeCoord(NamedTuple):
    """Signed subtree mass coordinate of a free-space element on a tree."""

    edge: int


class Scaled(NamedTuple):
    tag: Hashable
    inner: tuple


class SparseVector(Mapping):
    """Finitely supported real vector; explicit zeros are dropped."""

    __slots__ = ("_data",)

    def __init__(self, entries: Mapping | Iterable = ()):
        data = dict(entries)
        self._data = {k: float(v) for k, v in data.items() if v != 0}

    def __getitem__(self, key):
        return self._data.get(key, 0.0)

    def __iter__(self) -> Iterator:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, key) -> bool:
        return key in self._data

    def __repr__(self):
        return f"SparseVector({self._data!r})"

    def __eq__(self, other):
        if isinstance(other, SparseVector):
            return self._data == other._data
        return NotImplemented

    def norm1(self) -> float:
        return math.fsum(abs(v) for v in self._data.values())

    def __add__(self, other: "SparseVector") -> "SparseVector":
        out = dict(self._data)
        for k, v in other._data.items():
            out[k] = out.get(k, 0.0) + v
        return SparseVector(out)

    def __sub__(self, other: "SparseVector") -> "SparseVector":
        return self + other * -1.0

    def __mul__(self, c: float) -> "SparseVector":
        return SparseVector({k: c * v for k, v in self._data.items()})

    __rmul__ = __mul__

    def tagged(self, tag) -> "SparseVector":
        return SparseVector({Scaled(tag, k): v for k, v in self._data.items()})

    def l1_distance(self, other: "SparseVector") -> float:
        a, b = self._data, other._data
        terms = [abs(v - b.get(k, 0.0)) for k, v in a.items()]
        terms.extend(abs(v) for k, v in b.items() if k not in a)
        return math.fsum(terms)

    @staticmethod
    def concat(parts: Iterable["SparseVector"]) -> "SparseVector":
        out: dict = {}
        for p in parts:
            for k, v in p._data.items():
                if k in out:
                    raise MetricError(f"coordinate collision on {k!r}")
                out[k] = v
        return SparseVector(out)


# ----------------------------------------------------------------------------
# weighted trees
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightedTree:
    """Rooted tree given by parent pointers; ``weight[v]`` is the edge to ``parent[v]``.

    The root has ``parent == -1`` and its weight entry is ignored (stored as 0).
    """

    parent: tuple
    weight: tuple

    def __post_init__(self):
        parent = tuple(int(p) for p in self.parent)
        n = len(parent)
        if n < 1:
            raise MetricError("tree needs at least one vertex")
        if len(self.weight) != n:
            raise MetricError("parent and weight arrays differ in length")
        roots = [v for v, p in enumerate(parent) if p == -1]
        if len(roots) != 1:
            raise MetricError(f"tree must have exactly one root, found {roots}")
        weight = []
        for v, (p, w) in enumerate(zip(parent, self.weight)):
            if p == -1:
                weight.append(0.0)
                continue
            if not 0 <= p < n:
                raise MetricError(f"parent {p} of vertex {v} out of range")
            w = float(w)
            if not w > 0:
                raise MetricError(f"edge above vertex {v} has non-positive weight {w}")
            weight.append(w)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "weight", tuple(weight))
        if len(self.order) != n:
            raise MetricError("parent links contain a cycle")

    def __eq__(self, other):
        if not isinstance(other, WeightedTree):
            return NotImplemented
        return self.parent == other.parent and self.weight == other.weight

    def __hash__(self):
        return hash((self.parent, self.weight))

    @property
    def n(self) -> int:
        return len(self.parent)

    @cached_property
    def root(self) -> int:
        return self.parent.index(-1)

    @cached_property
    def children(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in range(self.n)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                ch[p].append(v)
        return ch

    @cached_property
    def order(self) -> list[int]:
        """Vertices in breadth-first order from the root."""
        out = [self.root]
        i = 0
        while i < len(out):
            out.extend(self.children[out[i]])
            i += 1
        return out

    @cached_property
    def depth(self) -> list[int]:
        dep = [0] * self.n
        for v in self.order[1:]:
            dep[v] = dep[self.parent[v]] + 1
        return dep

    @cached_property
    def root_distance(self) -> np.ndarray:
        rd = np.zeros(self.n)
        for v in self.order[1:]:
            rd[v] = rd[self.parent[v]] + self.weight[v]
        return rd

    @cached_property
    def tin_tout(self) -> tuple[list[int], list[int]]:
        tin = [0] * self.n
        tout = [0] * self.n
        clock = 0
        stack = [(self.root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                tout[v] = clock
                continue
            tin[v] = clock
            clock += 1
            stack.append((v, True))
            for c in reversed(self.children[v]):
                stack.append((c, False))
        return tin, tout

    def in_subtree(self, v: int, root_of_subtree: int) -> bool:
        tin, tout = self.tin_tout
        return tin[root_of_subtree] <= tin[v] < tout[root_of_subtree]

    def lca(self, u: int, v: int) -> int:
        par, dep = self.parent, self.depth
        while dep[u] > dep[v]:
            u = par[u]
        while dep[v] > dep[u]:
            v = par[v]
        while u != v:
            u, v = par[u], par[v]
        return u

    def distance(self, u: int, v: int) -> float:
        rd = self.root_distance
        return float(rd[u] + rd[v] - 2 * rd[self.lca(u, v)])

    def path_children(self, x: int, y: int) -> list[int]:
        """Child endpoints of the edges on the path ``x -> y``."""
        par, dep = self.parent, self.depth
        up: list[int] = []
        down: list[int] = []
        while dep[x] > dep[y]:
            up.append(x)
            x = par[x]
        while dep[y] > dep[x]:
            down.append(y)
            y = par[y]
        while x != y:
            up.append(x)
            down.append(y)
            x, y = par[x], par[y]
        return up + down[::-1]

    def edge(self, child: int) -> Edge:
        p = self.parent[child]
        return (min(child, p), max(child, p))

    def distance_matrix(self, vertices: Sequence[int] | None = None) -> np.ndarray:
        vs = list(range(self.n)) if vertices is None else list(vertices)
        rd = self.root_distance
        m = len(vs)
        out = np.zeros((m, m))
        for a in range(m):
            for b in range(a + 1, m):
                out[a, b] = out[b, a] = rd[vs[a]] + rd[vs[b]] - 2 * rd[self.lca(vs[a], vs[b])]
        return out

    def metric(self) -> MetricSpace:
        return MetricSpace(self.distance_matrix())

    def edges(self) -> list[tuple[int, int, float]]:
        return [(v, p, self.weight[v]) for v, p in enumerate(self.parent) if p >= 0]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int, float]], root: int = 0) -> "WeightedTree":
        adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        count = 0
        for u, v, w in edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
            count += 1
        if count != n - 1:
            raise MetricError(f"a tree on {n} vertices has {n - 1} edges, got {count}")
        parent = [-2] * n
        weight = [0.0] * n
        parent[root] = -1
        stack = [root]
        while stack:
            u = stack.pop()
            for v, w in adj[u]:
                if parent[v] == -2:
                    parent[v] = u
                    weight[v] = w
                    stack.append(v)
        if -2 in parent:
            raise MetricError("edge list is not connected")
        return cls(tuple(parent), tuple(weight))

    def rerooted(self, root: int) -> "WeightedTree":
        return WeightedTree.from_edges(self.n, self.edges(), root=root)


# ----------------------------------------------------------------------------
# paths, Steiner edges and the closed-form tree TSP
# ----------------------------------------------------------------------------


def path_edges(t: WeightedTree, x: int, y: int) -> frozenset[Edge]:
    return frozenset(t.edge(c) for c in t.path_children(x, y))


def steiner_edges(t: WeightedTree, x: int, lamps: Iterable[int]) -> frozenset[Edge]:
    out: set[Edge] = set()
    for a in lamps:
        out.update(t.edge(c) for c in t.path_children(x, a))
    return frozenset(out)


def _steiner_children(t: WeightedTree, x: int, lamps: Iterable[int]) -> set[int]:
    out: set[int] = set()
    for a in lamps:
        out.update(t.path_children(x, a))
    return out


def tsp_tree(t: WeightedTree, x: int, lamps: Iterable[int], y: int) -> float:
    """Tree TSP: twice the Steiner edges off the ``x``-``y`` path plus that path."""
    through = set(t.path_children(x, y))
    span = _steiner_children(t, x, lamps)
    w = t.weight
    return 2.0 * math.fsum(w[c] for c in span - through) + math.fsum(w[c] for c in through)


def tau_tree(t: WeightedTree, u: LamplighterPoint, v: LamplighterPoint) -> float:
    return tsp_tree(t, u.pos, u.lamps ^ v.lamps, v.pos)


# ----------------------------------------------------------------------------
# the embedding of Ts(T) into l1
# ----------------------------------------------------------------------------


def lamp_groups(t: WeightedTree, p: LamplighterPoint) -> dict[int, frozenset]:
    """``{edge: A_{x,e}}`` for every edge with a nonempty group.

    Off the root-to-``x`` chain, an edge's group is the lamps below it that
    climb through it to meet the chain.  On the chain, the group of the edge
    above ``c`` is the lamps meeting the chain strictly above ``c``.
    """
    par, dep = t.parent, t.depth
    x = p.pos
    chain = {}
    v = x
    while v != -1:
        chain[v] = dep[v]
        v = par[v]
    groups: dict[int, list] = {}
    meet_depth = []
    for a in p.lamps:
        v = a
        while v not in chain:
            groups.setdefault(v, []).append(a)
            v = par[v]
        meet_depth.append((chain[v], a))
    if meet_depth:
        meet_depth.sort()
        above: list = []
        k = 0
        for c in sorted(chain, key=chain.get):
            if c == t.root:
                continue
            while k < len(meet_depth) and meet_depth[k][0] < chain[c]:
                above.append(meet_depth[k][1])
                k += 1
            if above:
                groups[c] = list(above)
    return {c: frozenset(g) for c, g in groups.items()}


def _check_separated(t: WeightedTree, child: int, members: tuple) -> None:
    # e must not lie on any path between two members: all on one side of e
    sides = {t.in_subtree(a, child) for a in members}
    if len(sides) != 1:
        raise AssertionError(f"edge above {child} separates lamp group {members}")


def embed_ts_tree(t: WeightedTree, p: LamplighterPoint, check: bool = True) -> SparseVector:
    """Sparse image of ``p`` under the tree embedding (lamp groups + root path)."""
    w = t.weight
    out: dict = {}
    for c, members in lamp_groups(t, p).items():
        members = tuple(sorted(members))
        if check:
            _check_separated(t, c, members)
        out[TspCoord(c, members)] = w[c]
    for c in t.path_children(t.root, p.pos):
        out[RootPathCoord(c)] = w[c]
    return SparseVector(out)


def f_block_distance(t: WeightedTree, u: LamplighterPoint, v: LamplighterPoint) -> float:
    """L1 gap between the lamp-group blocks of ``u`` and ``v``, without building vectors."""
    gu = lamp_groups(t, u)
    gv = lamp_groups(t, v)
    w = t.weight
    total = 0.0
    for c, members in gu.items():
        other = gv.get(c)
        if other is None:
            total += w[c]
        elif other != members:
            total += 2 * w[c]
    for c in gv:
        if c not in gu:
            total += w[c]
    return total


def ts_tree_distance(t: WeightedTree, u: LamplighterPoint, v: LamplighterPoint) -> float:
    """``||g(u) - g(v)||_1`` computed directly; equals the vector computation."""
    return f_block_distance(t, u, v) + t.distance(u.pos, v.pos)


def pairwise_ts_tree_distances(t: WeightedTree, points: Sequence[LamplighterPoint]) -> np.ndarray:
    """Matrix of ``||g(p_a) - g(p_b)||_1`` over all point pairs.

    Each edge contributes ``w_e`` times 0 (same group), 1 (one side empty) or
    2 (two different nonempty groups); the root block contributes the tree
    distance between positions.
    """
    m = len(points)
    codes: dict[int, np.ndarray] = {}
    ids: dict[int, dict] = {}
    for a, p in enumerate(points):
        for c, members in lamp_groups(t, p).items():
            col = codes.get(c)
            if col is None:
                col = codes[c] = np.zeros(m, dtype=np.int64)
                ids[c] = {}
            table = ids[c]
            col[a] = table.setdefault(members, len(table) + 1)
    out = np.zeros((m, m))
    for c, col in codes.items():
        nz = (col > 0).astype(float)
        differ = col[:, None] != col[None, :]
        out += t.weight[c] * differ * (nz[:, None] + nz[None, :])
    pos = [p.pos for p in points]
    uniq = sorted(set(pos))
    where = {v: k for k, v in enumerate(uniq)}
    dm = t.distance_matrix(uniq)
    sel = np.array([where[v] for v in pos])
    out += dm[np.ix_(sel, sel)]
    return out


def inequality_six_bounds(t: WeightedTree, u: LamplighterPoint, v: LamplighterPoint) -> tuple[float, float]:
    """Lower and upper sandwich for the lamp-group block gap of ``u`` and ``v``.

    lower = sum of w_e over [x, A^B] minus [x, y];
    upper = 2 * lower + 2 * d(x, y).
    """
    x, y = u.pos, v.pos
    through = set(t.path_children(x, y))
    span = _steiner_children(t, x, u.lamps ^ v.lamps)
    w = t.weight
    lower = math.fsum(w[c] for c in span - through)
    upper = 2 * lower + 2 * math.fsum(w[c] for c in through)
    return lower, upper
