"""Stochastic embeddings into dominating tree metrics.

Two constructions are provided: a hierarchical random-partition tree
(the FRT scheme) for arbitrary finite metrics, and the exact "delete a
random edge" embedding of the n-cycle into paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Real
from typing import Sequence

import numpy as np

from .metric import TOL, MetricError, MetricSpace
from .trees import WeightedTree


class DominationError(MetricError):
    pass


def make_rng(*seed: int) -> np.random.Generator:
    """Counter-based generator keyed by an explicit seed tuple.

    ``make_rng(seed, i)`` gives the i-th independent stream of ``seed``.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(s) & (2**64 - 1) for s in seed])))


@dataclass(frozen=True, eq=False)
class TreeEmbedding:
    tree: WeightedTree
    point_map: tuple

    def __post_init__(self):
        pm = tuple(int(v) for v in self.point_map)
        if len(set(pm)) != len(pm):
            raise MetricError("point map of a tree embedding must be injective")
        if any(not 0 <= v < self.tree.n for v in pm):
            raise MetricError("point map sends a point outside the tree")
        object.__setattr__(self, "point_map", pm)

    @property
    def n(self) -> int:
        return len(self.point_map)

    @cached_property
    def distances(self) -> np.ndarray:
        """Tree distances between the images of the ground points."""
        return self.tree.distance_matrix(self.point_map)

    def domination_violations(self, m: MetricSpace, tol: float = TOL) -> list[tuple]:
        d = self.distances
        scale = max(1.0, m.diameter)
        deficit = m.dist - d
        bad_i, bad_j = np.nonzero(np.triu(deficit > tol * scale, k=1))
        return [((i, j), float(deficit[i, j])) for i, j in zip(bad_i.tolist(), bad_j.tolist())]


@dataclass(frozen=True, eq=False)
class StochasticEmbedding:
    """Finite distribution over tree embeddings; probabilities may be Fractions."""

    components: tuple

    def __post_init__(self):
        comps = tuple((p, e) for p, e in self.components)
        if not comps:
            raise MetricError("a stochastic embedding needs at least one component")
        for p, e in comps:
            if not (0 < p <= 1):
                raise MetricError(f"component probability {p} outside (0, 1]")
            if not isinstance(e, TreeEmbedding):
                raise MetricError("components must be TreeEmbedding instances")
        total = sum(p for p, _ in comps)
        if abs(float(total) - 1.0) > 1e-9:
            raise MetricError(f"probabilities sum to {float(total)}, not 1")
        n = {e.n for _, e in comps}
        if len(n) != 1:
            raise MetricError("components embed ground spaces of different sizes")
        object.__setattr__(self, "components", comps)

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    @property
    def n(self) -> int:
        return self.components[0][1].n

    @property
    def probabilities(self) -> list[float]:
        return [float(p) for p, _ in self.components]

    @cached_property
    def expected_distances(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for p, e in self.components:
            out += float(p) * e.distances
        return out


def identity_tree_embedding(t: WeightedTree) -> StochasticEmbedding:
    """A tree metric embedded into itself with probability one."""
    return StochasticEmbedding(((Fraction(1), TreeEmbedding(t, tuple(range(t.n)))),))


# ----------------------------------------------------------------------------
# FRT hierarchical decomposition
# ----------------------------------------------------------------------------


def frt_sample(m: MetricSpace, seed, index: int = 0) -> TreeEmbedding:
    """One random dominating tree from a hierarchical ball-carving of ``m``.

    Distances are rescaled so the smallest positive one is 1.  A random
    permutation and a radius factor ``beta`` (density ``1/(beta ln 2)`` on
    ``[1, 2)``) are drawn once.  Going down from the top level, each cluster
    at level ``i+1`` is split by sending every point to the first center in
    permutation order within ``beta * 2**(i-1)``; a level-``i`` node hangs
    below its parent on an edge of weight ``2**(i+1)`` (rescaled back).
    """
    seeds = seed if isinstance(seed, tuple) else (seed, index)
    rng = make_rng(*seeds)
    n = m.n
    if n == 1:
        return TreeEmbedding(WeightedTree((-1,), (0.0,)), (0,))
    scale = m.min_positive
    dist = m.dist / scale
    top = max(1, math.ceil(math.log2(dist.max())))
    perm = rng.permutation(n)
    beta = 2.0 ** rng.random()
    by_rank = dist[perm]  # row r = distances from the r-th center

    parent = [-1]
    weight = [0.0]
    labels = np.zeros(n, dtype=np.int64)  # node id of each point's current cluster
    for level in range(top - 1, -1, -1):
        radius = beta * 2.0 ** (level - 1)
        center_rank = np.argmax(by_rank <= radius, axis=0)
        keys = sorted(set(zip(labels.tolist(), center_rank.tolist())))
        node_of = {}
        for up, rank in keys:
            node_of[(up, rank)] = len(parent)
            parent.append(up)
            weight.append(2.0 ** (level + 1) * scale)
        labels = np.array([node_of[(u, r)] for u, r in zip(labels.tolist(), center_rank.tolist())])
    if len(set(labels.tolist())) != n:
        raise MetricError("bottom level of the decomposition is not made of singletons")
    emb = TreeEmbedding(WeightedTree(tuple(parent), tuple(weight)), tuple(labels.tolist()))
    bad = emb.domination_violations(m)
    if bad:
        raise DominationError(f"sampled tree fails domination on {bad[:3]}")
    return emb


def frt_ensemble(m: MetricSpace, k: int, seed: int) -> StochasticEmbedding:
    """``k`` independent trees with weight ``1/k``; tree ``i`` uses stream ``(seed, i)``."""
    if k < 1:
        raise MetricError("ensemble size must be at least 1")
    return StochasticEmbedding(tuple((Fraction(1, k), frt_sample(m, seed, i)) for i in range(k)))


# ----------------------------------------------------------------------------
# cycles
# ----------------------------------------------------------------------------


def karp_cycle_embedding(n: int) -> StochasticEmbedding:
    """Uniform mixture of the ``n`` paths left after deleting one edge of the unit n-cycle.

    Component ``j`` deletes the edge ``{j, j+1 mod n}`` and is rooted at ``j+1``.
    """
    if n < 3:
        raise MetricError(f"cycle needs n >= 3, got {n}")
    comps = []
    for j in range(n):
        root = (j + 1) % n
        parent = [0] * n
        parent[root] = -1
        for step in range(1, n):
            v = (root + step) % n
            parent[v] = (v - 1) % n
        weight = [0.0 if v == root else 1.0 for v in range(n)]
        comps.append((Fraction(1, n), TreeEmbedding(WeightedTree(tuple(parent), tuple(weight)), tuple(range(n)))))
    return StochasticEmbedding(tuple(comps))


# ----------------------------------------------------------------------------
# checks
# ----------------------------------------------------------------------------


def verify_domination(se: StochasticEmbedding, m: MetricSpace, tol: float = TOL) -> list[tuple]:
    """``[(component, (i, j), deficit), ...]`` for every pair a component shrinks."""
    if se.n != m.n:
        raise MetricError(f"embedding covers {se.n} points, metric has {m.n}")
    out = []
    for c, (_, emb) in enumerate(se):
        for pair, deficit in emb.domination_violations(m, tol):
            out.append((c, pair, deficit))
    return out


def expected_stretch(se: StochasticEmbedding, m: MetricSpace, exact: bool = False) -> tuple[Real, tuple]:
    """Smallest ``D`` with ``E[d_tree(x, y)] <= D d(x, y)`` on all pairs, and its witness.

    With ``exact=True`` the sum runs over Fractions (floats convert exactly),
    so the value is the exact rational number for the given tables.
    """
    n = m.n
    if n < 2:
        return (Fraction(1) if exact else 1.0), (0, 0)
    iu, ju = np.triu_indices(n, k=1)
    if not exact:
        ratio = se.expected_distances[iu, ju] / m.dist[iu, ju]
        k = int(np.argmax(ratio))
        return float(ratio[k]), (int(iu[k]), int(ju[k]))
    best, arg = None, None
    probs = [Fraction(p) for p, _ in se]
    tables = [e.distances for _, e in se]
    for i, j in zip(iu.tolist(), ju.tolist()):
        num = sum((p * Fraction(float(t[i, j])) for p, t in zip(probs, tables)), Fraction(0))
        r = num / Fraction(float(m.dist[i, j]))
        if best is None or r > best:
            best, arg = r, (i, j)
    return best, arg
