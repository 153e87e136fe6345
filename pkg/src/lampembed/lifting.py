"""End-to-end L1 embedding of lamplighter spaces through random trees.

A stochastic tree embedding of the ground space is pushed to lamplighter
points pointwise, each tree image is embedded with the explicit tree
embedding, the blocks are weighted by their probabilities, and an indicator
block of the lit lamps is appended.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .metric import TOL, DistortionReport, MetricSpace, distortion_from_arrays
from .stochastic import StochasticEmbedding, TreeEmbedding, expected_stretch, make_rng
from .trees import (
    LampCoord,
    SparseVector,
    embed_ts_tree,
    pairwise_ts_tree_distances,
    tsp_tree,
    ts_tree_distance,
)
from .tsp import DEFAULT_CAP, CapExceeded, LamplighterPoint, TauCache, held_karp_batch, tau_batch

Pair = tuple[LamplighterPoint, LamplighterPoint]


def lift_point(emb: TreeEmbedding, p: LamplighterPoint) -> LamplighterPoint:
    f = emb.point_map
    return LamplighterPoint((f[a] for a in p.lamps), f[p.pos])


def embed_lamplighter_l1(se: StochasticEmbedding, p: LamplighterPoint, lamps: bool = True) -> SparseVector:
    """Weighted concatenation of the per-tree images, plus the lamp indicator."""
    parts = [
        (float(prob) * embed_ts_tree(emb.tree, lift_point(emb, p))).tagged(i)
        for i, (prob, emb) in enumerate(se)
    ]
    if lamps:
        parts.append(SparseVector({LampCoord(a): 1.0 for a in p.lamps}))
    return SparseVector.concat(parts)


def ts_l1_distance(se: StochasticEmbedding, u: LamplighterPoint, v: LamplighterPoint) -> float:
    """``sum_i p_i ||g_i(lift u) - g_i(lift v)||_1`` without materialising vectors."""
    return math.fsum(
        float(p) * ts_tree_distance(e.tree, lift_point(e, u), lift_point(e, v)) for p, e in se
    )


def lamplighter_l1_distance(se: StochasticEmbedding, u: LamplighterPoint, v: LamplighterPoint) -> float:
    return ts_l1_distance(se, u, v) + len(u.lamps ^ v.lamps)


def pairwise_lamplighter_l1(se: StochasticEmbedding, points: Sequence[LamplighterPoint]) -> np.ndarray:
    out = np.zeros((len(points), len(points)))
    for p, e in se:
        out += float(p) * pairwise_ts_tree_distances(e.tree, [lift_point(e, q) for q in points])
    ground = sorted(set().union(*(q.lamps for q in points))) if points else []
    if len(ground) < 62:
        bit = {a: k for k, a in enumerate(ground)}
        masks = np.array([sum(1 << bit[a] for a in q.lamps) for q in points], dtype=np.int64)
        out += _popcount(masks[:, None] ^ masks[None, :])
    else:
        out += np.array([[len(a.lamps ^ b.lamps) for b in points] for a in points])
    return out


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x >>= 1
    return count


class PackedEnsemble:
    """Bitmask form of a stochastic embedding for fast batched L1 gaps.

    Every non-root tree node stores the set of ground points mapped below it
    (packed into 64-bit words) and its edge weight times the component
    probability.  The lamp group of an edge is ``A & below`` when ``x`` is
    outside the subtree and ``A & ~below`` otherwise.
    """

    def __init__(self, se: StochasticEmbedding):
        self.n = se.n
        self.words = (self.n + 63) // 64
        masks, weights = [], []
        for p, e in se:
            t = e.tree
            below = [[] for _ in range(t.n)]
            for g, leaf in enumerate(e.point_map):
                below[leaf].append(g)
            for v in reversed(t.order[1:]):
                below[t.parent[v]].extend(below[v])
                if below[v]:
                    masks.append(self._pack(below[v]))
                    weights.append(float(p) * t.weight[v])
        self.masks = np.array(masks, dtype=np.uint64).reshape(-1, self.words)
        self.weights = np.array(weights)
        self.expected = se.expected_distances

    def _pack(self, points) -> np.ndarray:
        out = np.zeros(self.words, dtype=np.uint64)
        for a in points:
            out[a >> 6] |= np.uint64(1) << np.uint64(a & 63)
        return out

    def _inside(self, x: int) -> np.ndarray:
        return ((self.masks[:, x >> 6] >> np.uint64(x & 63)) & np.uint64(1)).astype(bool)

    def _groups(self, lamps: np.ndarray, x: int) -> np.ndarray:
        inside = self._inside(x)[:, None]
        return np.where(inside, lamps & ~self.masks, lamps & self.masks)

    def ts_distance(self, u: LamplighterPoint, v: LamplighterPoint) -> float:
        gu = self._groups(self._pack(u.lamps), u.pos)
        gv = self._groups(self._pack(v.lamps), v.pos)
        nz = gu.any(axis=1).astype(float) + gv.any(axis=1)
        differ = (gu != gv).any(axis=1)
        return float(self.weights @ (differ * nz)) + float(self.expected[u.pos, v.pos])

    def lamplighter_distance(self, u: LamplighterPoint, v: LamplighterPoint) -> float:
        return self.ts_distance(u, v) + len(u.lamps ^ v.lamps)


# ----------------------------------------------------------------------------
# pair policies
# ----------------------------------------------------------------------------


def small_points(n: int, max_lamps: int) -> list[LamplighterPoint]:
    """Every ``(A, x)`` with ``|A| <= max_lamps`` over ``n`` ground points."""
    out = []
    for size in range(max_lamps + 1):
        for lamps in itertools.combinations(range(n), size):
            for x in range(n):
                out.append(LamplighterPoint(lamps, x))
    return out


def all_points(n: int) -> list[LamplighterPoint]:
    return small_points(n, n)


def sampled_pairs(n: int, count: int, max_symmdiff: int, seed: int, max_lamps: int | None = None) -> list[Pair]:
    """Seeded random pairs with ``1 <= |A ^ B| <= max_symmdiff`` (or distinct positions)."""
    rng = make_rng(seed, 0x5A1)
    cap = n if max_lamps is None else max_lamps
    out = []
    while len(out) < count:
        a_size = int(rng.integers(0, min(cap, n) + 1))
        lamps_a = rng.choice(n, size=a_size, replace=False).tolist()
        flip = int(rng.integers(0, min(max_symmdiff, n) + 1))
        lamps_b = set(lamps_a) ^ set(rng.choice(n, size=flip, replace=False).tolist())
        x, y = (int(v) for v in rng.integers(0, n, size=2))
        u, v = LamplighterPoint(lamps_a, x), LamplighterPoint(lamps_b, y)
        if u != v:
            out.append((u, v))
    return out


# ----------------------------------------------------------------------------
# distortion of the pipeline
# ----------------------------------------------------------------------------


def pipeline_distortion(
    se: StochasticEmbedding,
    m: MetricSpace,
    sample: Iterable[Pair],
    cap: int = DEFAULT_CAP,
    cache: TauCache | None = None,
) -> DistortionReport:
    """Distortion of the lamplighter embedding against exact lamplighter distances."""
    cache = cache or TauCache(m, cap)
    packed = PackedEnsemble(se)
    pairs = [(u, v) for u, v in sample if u != v]
    src = np.array([cache.lamplighter(u, v) for u, v in pairs])
    tgt = np.array([packed.lamplighter_distance(u, v) for u, v in pairs])
    return distortion_from_arrays(src, tgt, pairs)


def exhaustive_pipeline_distortion(
    se: StochasticEmbedding,
    m: MetricSpace,
    points: Sequence[LamplighterPoint],
    cap: int = DEFAULT_CAP,
) -> DistortionReport:
    """Same as :func:`pipeline_distortion` over every pair of ``points``, vectorised."""
    tgt = pairwise_lamplighter_l1(se, points)
    iu, ju = np.triu_indices(len(points), k=1)
    us = [points[i] for i in iu.tolist()]
    vs = [points[j] for j in ju.tolist()]
    src = tau_batch(m, us, vs, cap) + np.array([len(u.lamps ^ v.lamps) for u, v in zip(us, vs)])
    pairs = _LazyPairs(points, iu, ju)
    return distortion_from_arrays(src, tgt[iu, ju], pairs)


class _LazyPairs:
    def __init__(self, points, iu, ju):
        self.points, self.iu, self.ju = points, iu, ju

    def __getitem__(self, k):
        return (self.points[int(self.iu[k])], self.points[int(self.ju[k])])

    def __len__(self):
        return len(self.iu)


# ----------------------------------------------------------------------------
# the lifting lemma, checked numerically
# ----------------------------------------------------------------------------


@dataclass
class LiftingCheck:
    stretch: float
    pairs: int = 0
    domination_violations: list = None
    average_violations: list = None
    worst_average_ratio: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.domination_violations and not self.average_violations

    def as_dict(self) -> dict:
        return {
            "stretch": self.stretch,
            "pairs": self.pairs,
            "domination_violations": len(self.domination_violations),
            "average_violations": len(self.average_violations),
            "worst_average_ratio": self.worst_average_ratio,
        }


def check_lifting(
    se: StochasticEmbedding,
    m: MetricSpace,
    sample: Iterable[Pair],
    stretch: float | None = None,
    cap: int = DEFAULT_CAP,
    tol: float = TOL,
) -> LiftingCheck:
    """Per-component domination and averaged stretch of tau under lifting.

    tau on each tree comes from the closed-form tree TSP; tau on the ground
    space from batched Held-Karp.
    """
    if stretch is None:
        stretch = float(expected_stretch(se, m)[0])
    pairs = list(sample)
    res = LiftingCheck(stretch=stretch, domination_violations=[], average_violations=[])
    if not pairs:
        return res
    bases = tau_batch(m, [u for u, _ in pairs], [v for _, v in pairs], cap)
    comps = list(se)
    for (u, v), base in zip(pairs, bases.tolist()):
        slack = tol * max(1.0, base)
        total = 0.0
        for i, (p, e) in enumerate(comps):
            lu, lv = lift_point(e, u), lift_point(e, v)
            t = tsp_tree(e.tree, lu.pos, lu.lamps ^ lv.lamps, lv.pos)
            if t < base - slack:
                res.domination_violations.append((i, u, v, t, base))
            total += float(p) * t
        if total > stretch * base + slack:
            res.average_violations.append((u, v, total, base))
        if base > 0:
            res.worst_average_ratio = max(res.worst_average_ratio, total / base)
        res.pairs += 1
    return res


# ----------------------------------------------------------------------------
# the whole lamplighter space of a small ground space
# ----------------------------------------------------------------------------

FULL_SPACE_CAP = 10


def tau_table(m: MetricSpace, cap: int = DEFAULT_CAP) -> np.ndarray:
    """``T[x, mask, y] = tau((emptyset, x), (mask, y))`` for every lamp mask."""
    n = m.n
    if n > FULL_SPACE_CAP:
        raise CapExceeded(n, FULL_SPACE_CAP, "ground points exceed the full-space cap")
    out = np.empty((n, 1 << n, n))
    by_size: dict[int, list[int]] = {}
    for mask in range(1 << n):
        by_size.setdefault(bin(mask).count("1"), []).append(mask)
    xs, ys = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    xs, ys = xs.ravel(), ys.ravel()
    for k, masks in by_size.items():
        if k > cap:
            raise CapExceeded(k, cap)
        for mask in masks:
            stops = np.array([a for a in range(n) if mask >> a & 1], dtype=np.int64)
            out[:, mask, :] = held_karp_batch(m.dist, xs, np.tile(stops, (len(xs), 1)), ys).reshape(n, n)
    return out


def full_space_distortion(se: StochasticEmbedding, m: MetricSpace, cap: int = DEFAULT_CAP) -> DistortionReport:
    """Distortion of the lamplighter embedding over every pair of ``La(X)``.

    tau depends only on ``(x, A ^ B, y)``, so one table of ``n * 2**n * n``
    route lengths covers all ``(n 2**n)**2`` pairs.
    """
    n = m.n
    table = tau_table(m, cap)
    pts = all_points(n)
    masks = np.array([sum(1 << a for a in p.lamps) for p in pts], dtype=np.int64)
    pos = np.array([p.pos for p in pts], dtype=np.int64)
    tgt = pairwise_lamplighter_l1(se, pts)
    iu, ju = np.triu_indices(len(pts), k=1)
    diff = masks[iu] ^ masks[ju]
    src = table[pos[iu], diff, pos[ju]] + _popcount(diff)
    return distortion_from_arrays(src, tgt[iu, ju], _LazyPairs(pts, iu, ju))
