"""Finite metric spaces built from weighted graphs, plus distortion bookkeeping."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

TOL = 1e-9


class MetricError(ValueError):
    """Raised for malformed graphs, metrics or distortion queries."""


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph on vertices ``0..n-1`` with positive edge weights.

    Construction rejects self loops, duplicate edges, non-positive weights
    and disconnected inputs.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise MetricError(f"graph needs at least one vertex, got n={self.n}")
        canon = []
        seen = set()
        for u, v, w in self.edges:
            u, v, w = int(u), int(v), float(w)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise MetricError(f"edge ({u},{v}) out of range for n={self.n}")
            if u == v:
                raise MetricError(f"self-loop at vertex {u}")
            if not w > 0 or not math.isfinite(w):
                raise MetricError(f"edge ({u},{v}) has non-positive weight {w}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise MetricError(f"duplicate edge {key}")
            seen.add(key)
            canon.append((u, v, w))
        object.__setattr__(self, "edges", tuple(canon))
        # connectivity check
        reach = {0}
        stack = [0]
        adj = self.adjacency
        while stack:
            u = stack.pop()
            for v, _ in adj[u]:
                if v not in reach:
                    reach.add(v)
                    stack.append(v)
        if len(reach) != self.n:
            missing = min(set(range(self.n)) - reach)
            raise MetricError(f"graph is disconnected: no path between 0 and {missing}")

    @cached_property
    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return adj

    @property
    def is_unit(self) -> bool:
        return all(w == 1.0 for _, _, w in self.edges)


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """Point set ``0..n-1`` with a distance table.

    Only the shape is enforced here; use :func:`validate_metric` to find
    axiom violations (the table may deliberately be a semi-metric).
    """

    dist: np.ndarray

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise MetricError(f"distance table must be square and nonempty, got shape {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def __call__(self, i: int, j: int) -> float:
        return float(self.dist[i, j])

    @cached_property
    def min_positive(self) -> float:
        pos = self.dist[self.dist > 0]
        return float(pos.min()) if pos.size else 1.0

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max())


def shortest_path_metric(g: WeightedGraph) -> MetricSpace:
    """All-pairs shortest path distances by one Dijkstra run per source."""
    n = g.n
    adj = g.adjacency
    dist = np.full((n, n), math.inf)
    for s in range(n):
        row = dist[s]
        row[s] = 0.0
        heap = [(0.0, s)]
        done = [False] * n
        while heap:
            du, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for v, w in adj[u]:
                nd = du + w
                if nd < row[v]:
                    row[v] = nd
                    heapq.heappush(heap, (nd, v))
        if not all(done):
            t = done.index(False)
            raise MetricError(f"graph is disconnected: no path between {s} and {t}")
    # Dijkstra from both ends agrees up to summation order; pin exact symmetry.
    dist = np.minimum(dist, dist.T)
    return MetricSpace(dist)


def validate_metric(m: MetricSpace | np.ndarray, tol: float = TOL) -> list[tuple]:
    """Report every metric-axiom violation of a distance table.

    Each violation is a tuple whose first entry names the axiom:
    ``("diagonal", i)``, ``("negative", i, j)``, ``("symmetry", i, j)``,
    ``("definite", i, j)`` or ``("triangle", i, j, k)`` for
    ``d[i,k] > d[i,j] + d[j,k]``.  Pairs are reported once with ``i < j``.
    """
    d = m.dist if isinstance(m, MetricSpace) else np.asarray(m, dtype=float)
    n = d.shape[0]
    scale = max(1.0, float(np.abs(d).max())) if d.size else 1.0
    eps = tol * scale
    out: list[tuple] = []
    for i in range(n):
        if abs(d[i, i]) > eps:
            out.append(("diagonal", i))
    iu, ju = np.triu_indices(n, k=1)
    for i, j in zip(iu.tolist(), ju.tolist()):
        if d[i, j] < -eps or d[j, i] < -eps:
            out.append(("negative", i, j))
        if abs(d[i, j] - d[j, i]) > eps:
            out.append(("symmetry", i, j))
        if d[i, j] <= eps:
            out.append(("definite", i, j))
    # d[i,k] - d[i,j] - d[j,k] over all triples, one middle point at a time
    for j in range(n):
        excess = d - d[:, j][:, None] - d[j, :][None, :]
        bad_i, bad_k = np.nonzero(excess > eps)
        for i, k in zip(bad_i.tolist(), bad_k.tolist()):
            if i < k and j != i and j != k:
                out.append(("triangle", i, j, k))
    return out


@dataclass(frozen=True)
class DistortionReport:
    expansion: float
    contraction: float
    distortion: float
    expansion_pair: tuple | None = None
    contraction_pair: tuple | None = None
    pairs: int = field(default=0, compare=False)

    def as_dict(self) -> dict:
        return {
            "expansion": self.expansion,
            "contraction": self.contraction,
            "distortion": self.distortion,
            "expansion_pair": _jsonable(self.expansion_pair),
            "contraction_pair": _jsonable(self.contraction_pair),
            "pairs": self.pairs,
        }


def _jsonable(obj):
    if isinstance(obj, (frozenset, set)):
        return sorted(_jsonable(x) for x in obj)
    if isinstance(obj, (tuple, list)):
        return [_jsonable(x) for x in obj]
    if hasattr(obj, "as_json"):
        return obj.as_json()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def measure_distortion(
    pairs: Sequence[tuple[Hashable, Hashable]],
    d_source: Callable[[Hashable, Hashable], float],
    d_target: Callable[[Hashable, Hashable], float],
) -> DistortionReport:
    """Worst expansion, worst contraction and their product over ``pairs``.

    The result does not depend on a uniform rescaling of the target distances.
    """
    pairs = list(pairs)
    if not pairs:
        raise MetricError("cannot measure distortion over an empty pair list")
    src = np.empty(len(pairs))
    tgt = np.empty(len(pairs))
    for k, (u, v) in enumerate(pairs):
        s = d_source(u, v)
        if not s > 0:
            raise MetricError(f"source distance of pair {(u, v)!r} is {s}, must be positive")
        src[k] = s
        tgt[k] = d_target(u, v)
    return distortion_from_arrays(src, tgt, pairs)


def distortion_from_arrays(src, tgt, pairs: Sequence | None = None) -> DistortionReport:
    """Array form of :func:`measure_distortion` for precomputed distances."""
    src = np.asarray(src, dtype=float)
    tgt = np.asarray(tgt, dtype=float)
    if src.size == 0:
        raise MetricError("cannot measure distortion over an empty pair list")
    if np.any(src <= 0):
        k = int(np.argmax(src <= 0))
        where = pairs[k] if pairs is not None else k
        raise MetricError(f"source distance of pair {where!r} is {src[k]}, must be positive")
    ratio = tgt / src
    ie = int(np.argmax(ratio))
    expansion = float(ratio[ie])
    if np.any(tgt <= 0):
        ic = int(np.argmax(tgt <= 0))
        contraction = math.inf
    else:
        inv = src / tgt
        ic = int(np.argmax(inv))
        contraction = float(inv[ic])
    pick = (lambda k: pairs[k]) if pairs is not None else (lambda k: k)
    return DistortionReport(
        expansion=expansion,
        contraction=contraction,
        distortion=expansion * contraction,
        expansion_pair=pick(ie),
        contraction_pair=pick(ic),
        pairs=int(src.size),
    )


def metric_from_points(points: Iterable[Sequence[int]]) -> MetricSpace:
    """L1 metric on a list of lattice points."""
    p = np.asarray(list(points), dtype=float)
    return MetricSpace(np.abs(p[:, None, :] - p[None, :, :]).sum(axis=2))
