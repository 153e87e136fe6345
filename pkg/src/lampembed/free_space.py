"""Lipschitz-free norms of molecules and their L1 embedding through random trees."""

from __future__ import annotations

import heapq
import math
from typing import Mapping

import numpy as np

from .metric import MetricError, MetricSpace
from .stochastic import StochasticEmbedding, TreeEmbedding
from .trees import EdgeCoord, SparseVector, WeightedTree

BALANCE_TOL = 1e-9


class Molecule(Mapping):
    """Finitely supported zero-sum function on points."""

    __slots__ = ("_w",)

    def __init__(self, support: Mapping | None = None, check: bool = True):
        w = {k: float(v) for k, v in dict(support or {}).items() if v != 0}
        if check:
            total = math.fsum(w.values())
            scale = max([1.0] + [abs(v) for v in w.values()])
            if abs(total) > BALANCE_TOL * scale:
                raise MetricError(f"molecule is unbalanced: total mass {total}")
        self._w = w

    def __getitem__(self, k):
        return self._w.get(k, 0.0)

    def __iter__(self):
        return iter(self._w)

    def __len__(self):
        return len(self._w)

    def __repr__(self):
        return f"Molecule({self._w!r})"

    def __add__(self, other: "Molecule") -> "Molecule":
        out = dict(self._w)
        for k, v in other.items():
            out[k] = out.get(k, 0.0) + v
        return Molecule(out)

    def __mul__(self, c: float) -> "Molecule":
        return Molecule({k: c * v for k, v in self._w.items()})

    __rmul__ = __mul__

    @classmethod
    def dipole(cls, p, q) -> "Molecule":
        return cls({p: 1.0, q: -1.0}) if p != q else cls()


def transport_cost(supply: Mapping[int, float], demand: Mapping[int, float], cost) -> float:
    """Minimum cost of shipping ``supply`` to ``demand`` along ``cost[i][j]``.

    Successive shortest augmenting paths with Dijkstra on reduced costs over
    the complete bipartite graph.  Amounts are real; residuals below a relative
    epsilon count as exhausted.
    """
    src = [i for i, a in supply.items() if a > 0]
    dst = [j for j, b in demand.items() if b > 0]
    if not src:
        return 0.0
    s_amt = [float(supply[i]) for i in src]
    t_amt = [float(demand[j]) for j in dst]
    total = math.fsum(s_amt)
    if abs(total - math.fsum(t_amt)) > BALANCE_TOL * max(1.0, total):
        raise MetricError("supply and demand do not balance")
    eps = 1e-12 * max(1.0, total)
    ns, nt = len(src), len(dst)
    c = [[float(cost[i][j]) for j in dst] for i in src]
    flow = [[0.0] * nt for _ in range(ns)]
    pot_s = [0.0] * ns
    pot_t = [min(c[i][j] for i in range(ns)) for j in range(nt)]
    left_s = list(s_amt)
    left_t = list(t_amt)
    shipped = 0.0
    # nodes: 0..ns-1 supply side, ns..ns+nt-1 demand side
    while total - shipped > eps:
        dist = [math.inf] * (ns + nt)
        prev = [-1] * (ns + nt)
        heap = []
        # real distance from a virtual source = reduced distance + potential
        for i in range(ns):
            if left_s[i] > eps:
                dist[i] = -pot_s[i]
                heap.append((dist[i], i))
        heapq.heapify(heap)
        done = [False] * (ns + nt)
        while heap:
            du, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            if u < ns:
                for j in range(nt):
                    v = ns + j
                    if done[v]:
                        continue
                    nd = du + c[u][j] + pot_s[u] - pot_t[j]
                    if nd < dist[v] - 1e-15:
                        dist[v] = nd
                        prev[v] = u
                        heapq.heappush(heap, (nd, v))
            else:
                j = u - ns
                for i in range(ns):
                    # settled labels are final; relabelling them could close a cycle in prev
                    if flow[i][j] > eps and not done[i]:
                        nd = du - c[i][j] + pot_t[j] - pot_s[i]
                        if nd < dist[i] - 1e-15:
                            dist[i] = nd
                            prev[i] = u
                            heapq.heappush(heap, (nd, i))
        for i in range(ns):
            if done[i]:
                pot_s[i] += dist[i]
        for j in range(nt):
            if done[ns + j]:
                pot_t[j] += dist[ns + j]
        best = min((j for j in range(nt) if left_t[j] > eps and done[ns + j]), key=lambda j: pot_t[j], default=None)
        if best is None:
            raise MetricError("transport problem has no augmenting path")
        # walk back, find bottleneck
        path = []
        v = ns + best
        while prev[v] != -1:
            path.append((prev[v], v))
            v = prev[v]
        head = v
        amount = min(left_s[head], left_t[best])
        for u, w in path:
            if u >= ns:  # backward arc t -> s cancels flow
                amount = min(amount, flow[w][u - ns])
        for u, w in path:
            if u < ns:
                flow[u][w - ns] += amount
            else:
                flow[w][u - ns] -= amount
        left_s[head] -= amount
        left_t[best] -= amount
        shipped += amount
    return math.fsum(flow[i][j] * c[i][j] for i in range(ns) for j in range(nt) if flow[i][j] > 0)


def lf_norm(m: MetricSpace, mu: Molecule) -> float:
    """Free-space norm: optimal transport cost from the positive to the negative part."""
    for p in mu:
        if not 0 <= p < m.n:
            raise MetricError(f"molecule point {p} outside the metric space")
    supply = {p: v for p, v in mu.items() if v > 0}
    demand = {p: -v for p, v in mu.items() if v < 0}
    return transport_cost(supply, demand, m.dist)


def lf_norm_tree(t: WeightedTree, mu: Molecule) -> tuple[float, SparseVector]:
    """Free norm on a tree and its l1 coordinates.

    Coordinate ``EdgeCoord(v)`` is ``w(v, parent v)`` times the mass of ``mu``
    in the subtree below ``v``; the norm is the l1 norm of these coordinates.
    """
    mass = np.zeros(t.n)
    for p, val in mu.items():
        if not 0 <= p < t.n:
            raise MetricError(f"molecule point {p} outside the tree")
        mass[p] += val
    for v in reversed(t.order[1:]):
        mass[t.parent[v]] += mass[v]
    coords = SparseVector({EdgeCoord(v): t.weight[v] * mass[v] for v in t.order[1:]})
    return coords.norm1(), coords


def lift_molecule(emb: TreeEmbedding, mu: Molecule) -> Molecule:
    f = emb.point_map
    return Molecule({f[p]: v for p, v in mu.items()}, check=False)


def lf_l1_embedding(se: StochasticEmbedding, mu: Molecule) -> SparseVector:
    """Linear map of molecules into l1: weighted, namespaced tree coordinates."""
    parts = []
    for i, (p, emb) in enumerate(se):
        _, coords = lf_norm_tree(emb.tree, lift_molecule(emb, mu))
        parts.append((float(p) * coords).tagged(i))
    return SparseVector.concat(parts)


def random_molecule(n: int, rng: np.random.Generator, support: int | None = None) -> Molecule:
    """Random zero-sum molecule on ``support`` distinct points (default: random size >= 2)."""
    k = int(rng.integers(2, n + 1)) if support is None else support
    pts = rng.choice(n, size=k, replace=False)
    vals = rng.normal(size=k)
    vals -= vals.mean()
    w = {int(p): float(v) for p, v in zip(pts, vals)}
    # absorb rounding into one entry so the mass is zero to the last bit
    last = int(pts[-1])
    w[last] = -math.fsum(v for p, v in w.items() if p != last)
    return Molecule(w)
