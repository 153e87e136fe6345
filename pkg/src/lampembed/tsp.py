"""Exact travelling-salesman semi-metric and lamplighter distances.

``tau((A,x),(B,y))`` is the cheapest route from ``x`` to ``y`` through every
point of ``A ^ B``; the lamplighter distance adds ``|A ^ B|`` lamp toggles.
Both are solved exactly with Held-Karp subset dynamic programming.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .metric import MetricError, MetricSpace, WeightedGraph

DEFAULT_CAP = 20
BFS_CAP = 14
_PY_DP_LIMIT = 8


class CapExceeded(ValueError):
    def __init__(self, size: int, cap: int, what: str = "targets exceed the exact-solver cap"):
        super().__init__(f"{size} {what} of {cap}")
        self.size = size
        self.cap = cap


@dataclass(frozen=True)
class LamplighterPoint:
    """Lit lamps ``A`` together with the lamplighter position ``x``.

    Points may be any hashables (vertex indices, lattice tuples, tree nodes).
    """

    lamps: frozenset
    pos: Hashable

    def __init__(self, lamps: Iterable = (), pos: Hashable = 0):
        object.__setattr__(self, "lamps", frozenset(lamps))
        object.__setattr__(self, "pos", pos)

    def __repr__(self):
        return f"({sorted(self.lamps)}, {self.pos!r})"

    def as_json(self):
        return {"lamps": sorted(self.lamps), "pos": self.pos}

    def check(self, n: int) -> "LamplighterPoint":
        if not (0 <= self.pos < n) or any(not (0 <= a < n) for a in self.lamps):
            raise MetricError(f"lamplighter point {self!r} out of range for n={n}")
        return self


@dataclass(frozen=True)
class TspInstance:
    space: MetricSpace
    start: int
    targets: frozenset
    end: int
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        object.__setattr__(self, "targets", frozenset(self.targets))
        n = self.space.n
        for p in (self.start, self.end, *self.targets):
            if not 0 <= p < n:
                raise MetricError(f"point {p} out of range for n={n}")


def held_karp(d, start: int, stops: Iterable[int], end: int, cap: int = DEFAULT_CAP) -> float:
    """Cheapest ``start -> end`` path through all ``stops`` under the table ``d``.

    ``d`` is any 2-D indexable (numpy array or nested lists).  Stops equal to
    ``start`` or ``end`` are dropped, since the path already visits them.
    ``start == end`` gives a closed tour.
    """
    stops = sorted(set(stops) - {start, end})
    k = len(stops)
    if k > cap:
        raise CapExceeded(k, cap)
    d = np.asarray(d, dtype=float)
    if k == 0:
        return float(d[start, end])
    idx = np.asarray(stops)
    inner = d[np.ix_(idx, idx)]
    first = d[start, idx]
    last = d[idx, end]
    if k <= _PY_DP_LIMIT:
        return _held_karp_py(inner.tolist(), first.tolist(), last.tolist())
    return _held_karp_np(inner, first, last)


def _held_karp_py(inner, first, last) -> float:
    k = len(first)
    full = (1 << k) - 1
    inf = math.inf
    dp = [[inf] * k for _ in range(1 << k)]
    for j in range(k):
        dp[1 << j][j] = first[j]
    for mask in range(1, full + 1):
        row = dp[mask]
        for j in range(k):
            cost = row[j]
            if cost == inf:
                continue
            dj = inner[j]
            for t in range(k):
                if mask >> t & 1:
                    continue
                nxt = mask | (1 << t)
                c = cost + dj[t]
                if c < dp[nxt][t]:
                    dp[nxt][t] = c
    return min(dp[full][j] + last[j] for j in range(k))


def _held_karp_np(inner: np.ndarray, first: np.ndarray, last: np.ndarray) -> float:
    k = len(first)
    size = 1 << k
    masks = np.arange(size)
    pop = np.zeros(size, dtype=np.int64)
    for j in range(k):
        pop += (masks >> j) & 1
    dp = np.full((size, k), np.inf)
    for j in range(k):
        dp[1 << j, j] = first[j]
    for s in range(2, k + 1):
        layer = masks[pop == s]
        for j in range(k):
            m = layer[(layer >> j) & 1 == 1]
            prev = dp[m ^ (1 << j)]
            dp[m, j] = (prev + inner[:, j][None, :]).min(axis=1)
    return float((dp[size - 1] + last).min())


def tsp_exact(inst: TspInstance) -> float:
    return held_karp(inst.space.dist, inst.start, inst.targets, inst.end, cap=inst.cap)


def tau(space: MetricSpace, u: LamplighterPoint, v: LamplighterPoint, cap: int = DEFAULT_CAP) -> float:
    """Travelling-salesman semi-metric between two lamplighter points."""
    return held_karp(space.dist, u.pos, u.lamps ^ v.lamps, v.pos, cap=cap)


def lamplighter_distance(
    space: MetricSpace, u: LamplighterPoint, v: LamplighterPoint, cap: int = DEFAULT_CAP
) -> float:
    return tau(space, u, v, cap=cap) + len(u.lamps ^ v.lamps)


class TauCache:
    """Memoised ``tau`` keyed by ``(x, A ^ B, y)``, the only data it depends on."""

    def __init__(self, space: MetricSpace, cap: int = DEFAULT_CAP):
        self.space = space
        self.cap = cap
        self._d = space.dist
        self._memo: dict = {}

    def route(self, x, targets: frozenset, y) -> float:
        key = (x, targets, y) if x <= y else (y, targets, x)
        val = self._memo.get(key)
        if val is None:
            val = held_karp(self._d, x, targets, y, cap=self.cap)
            self._memo[key] = val
        return val

    def tau(self, u: LamplighterPoint, v: LamplighterPoint) -> float:
        return self.route(u.pos, u.lamps ^ v.lamps, v.pos)

    def lamplighter(self, u: LamplighterPoint, v: LamplighterPoint) -> float:
        c = u.lamps ^ v.lamps
        return self.route(u.pos, c, v.pos) + len(c)


def held_karp_batch(d, start, stops, end) -> np.ndarray:
    """Held-Karp over many instances sharing one distance table.

    ``start``/``end`` are index arrays of shape ``(B,)`` and ``stops`` has
    shape ``(B, k)``.  Repeated stops, or stops equal to an endpoint, do not
    change the optimum.
    """
    d = np.asarray(d, dtype=float)
    start = np.asarray(start, dtype=np.int64)
    end = np.asarray(end, dtype=np.int64)
    stops = np.asarray(stops, dtype=np.int64).reshape(len(start), -1)
    if stops.shape[1] == 0:
        return d[start, end]
    return _batch_dp(d[stops[:, :, None], stops[:, None, :]], d[start[:, None], stops], d[stops, end[:, None]])


def tau_batch(space: MetricSpace, us: Sequence[LamplighterPoint], vs: Sequence[LamplighterPoint],
              cap: int = DEFAULT_CAP) -> np.ndarray:
    """``tau(us[i], vs[i])`` for every ``i``, batching instances by target count."""
    out = np.empty(len(us))
    groups: dict[int, list[int]] = {}
    diffs = [sorted(u.lamps ^ v.lamps) for u, v in zip(us, vs)]
    for i, c in enumerate(diffs):
        groups.setdefault(len(c), []).append(i)
    for k, idx in groups.items():
        if k > cap:
            raise CapExceeded(k, cap)
        for lo in range(0, len(idx), 50_000):
            part = idx[lo: lo + 50_000]
            start = [us[i].pos for i in part]
            end = [vs[i].pos for i in part]
            stops = np.array([diffs[i] for i in part], dtype=np.int64).reshape(len(part), k)
            out[part] = held_karp_batch(space.dist, start, stops, end)
    return out


def tsp_exact_batch(start: np.ndarray, stops: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Held-Karp vectorised over many lattice instances under the L1 metric.

    ``start``/``end`` have shape ``(B, d)``; ``stops`` has shape ``(B, k, d)``.
    Duplicate stops or stops equal to an endpoint are harmless: they cost
    nothing extra on an optimal route.
    """
    start = np.asarray(start)
    end = np.asarray(end)
    stops = np.asarray(stops)
    b, k = stops.shape[0], stops.shape[1]
    if k == 0:
        return np.abs(start - end).sum(axis=1).astype(float)
    inner = np.abs(stops[:, :, None, :] - stops[:, None, :, :]).sum(axis=3).astype(float)
    first = np.abs(stops - start[:, None, :]).sum(axis=2).astype(float)
    last = np.abs(stops - end[:, None, :]).sum(axis=2).astype(float)
    return _batch_dp(inner, first, last)


def _batch_dp(inner: np.ndarray, first: np.ndarray, last: np.ndarray) -> np.ndarray:
    """Subset DP over a batch: ``inner`` is ``(B, k, k)``, ``first``/``last`` are ``(B, k)``."""
    b, k = first.shape
    size = 1 << k
    dp = np.full((size, b, k), np.inf)
    for j in range(k):
        dp[1 << j, :, j] = first[:, j]
    for mask in range(1, size):
        for j in range(k):
            if not mask >> j & 1 or mask == 1 << j:
                continue
            prev = dp[mask ^ (1 << j)]
            dp[mask, :, j] = (prev + inner[:, :, j]).min(axis=1)
    return (dp[size - 1] + last).min(axis=1)


def lamplighter_bfs_distances(g: WeightedGraph, source: LamplighterPoint, cap: int = BFS_CAP) -> np.ndarray:
    """Breadth-first distances from ``source`` in the explicit lamplighter graph.

    Returns an array indexed ``[lamp_mask, position]``; bit ``a`` of the mask
    says whether lamp ``a`` is lit.
    """
    n = g.n
    if n > cap:
        raise CapExceeded(n, cap)
    if not g.is_unit:
        raise MetricError("lamplighter graph oracle needs unit edge weights")
    source.check(n)
    nbrs = [[v for v, _ in g.adjacency[u]] for u in range(n)]
    dist = np.full((1 << n, n), -1, dtype=np.int64)
    flat = dist.reshape(-1)
    s_mask = sum(1 << a for a in source.lamps)
    s = s_mask * n + source.pos
    flat[s] = 0
    queue = deque([s])
    while queue:
        state = queue.popleft()
        mask, x = divmod(state, n)
        nd = flat[state] + 1
        base = mask * n
        for y in nbrs[x]:
            t = base + y
            if flat[t] < 0:
                flat[t] = nd
                queue.append(t)
        t = (mask ^ (1 << x)) * n + x
        if flat[t] < 0:
            flat[t] = nd
            queue.append(t)
    return dist


def lamplighter_bfs_oracle(
    g: WeightedGraph, u: LamplighterPoint, v: LamplighterPoint, cap: int = BFS_CAP
) -> int:
    """Graph distance between ``u`` and ``v`` in the lamplighter graph of ``g``."""
    dist = lamplighter_bfs_distances(g, u, cap=cap)
    v.check(g.n)
    mask = sum(1 << a for a in v.lamps)
    return int(dist[mask, v.pos])
