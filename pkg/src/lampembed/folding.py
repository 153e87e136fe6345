"""Folding the integer lattice onto a finite grid, and the multi-scale coarse embedding.

``fold_line`` reflects Z onto {0..n-1} block by block; its d-fold product is
1-Lipschitz for the L1 metric and an isometry on each cube ``v + n*s + [0,n)^d``.
Lamp sets are folded cell by cell and combined by symmetric difference, which
keeps pairs confined to one cell at the same travelling-salesman distance.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .generators import grid_graph, grid_index
from .lifting import PackedEnsemble, lift_point
from .metric import MetricError, metric_from_points, shortest_path_metric
from .stochastic import StochasticEmbedding, expected_stretch, frt_ensemble, make_rng
from .trees import SparseVector, embed_ts_tree, ts_tree_distance
from .tsp import DEFAULT_CAP, CapExceeded, LamplighterPoint, held_karp, tsp_exact_batch

LatticePoint = tuple[int, ...]


def fold_line(n: int, z: int) -> int:
    if n < 1:
        raise MetricError(f"fold width must be >= 1, got {n}")
    i, j = divmod(z, n)
    return j if i % 2 == 0 else n - j - 1


def fold_lattice(n: int, d: int, v: LatticePoint, x: LatticePoint) -> LatticePoint:
    if len(v) != d or len(x) != d:
        raise MetricError(f"expected {d}-dimensional points, got {v} and {x}")
    return tuple(fold_line(n, a - b) for a, b in zip(x, v))


def cell_of(n: int, v: LatticePoint, x: LatticePoint) -> LatticePoint:
    return tuple((a - b) // n for a, b in zip(x, v))


def fold_set(n: int, d: int, v: LatticePoint, points: Iterable[LatticePoint]) -> frozenset:
    """Fold each cell's piece of the set and add the pieces mod 2."""
    out: set = set()
    for x in points:
        out ^= {fold_lattice(n, d, v, x)}
    return frozenset(out)


def fold_set_by_cells(n: int, d: int, v: LatticePoint, points: Iterable[LatticePoint]) -> frozenset:
    """Literal cell-by-cell form of :func:`fold_set` (kept as a cross-check)."""
    cells: dict = defaultdict(set)
    for x in points:
        cells[cell_of(n, v, x)].add(x)
    out: frozenset = frozenset()
    for piece in cells.values():
        out = out ^ frozenset(fold_lattice(n, d, v, x) for x in piece)
    return out


def fold_ts(n: int, d: int, v: LatticePoint, p: LamplighterPoint) -> LamplighterPoint:
    return LamplighterPoint(fold_set(n, d, v, p.lamps), fold_lattice(n, d, v, p.pos))


def lattice_tsp(x: LatticePoint, stops: Iterable[LatticePoint], y: LatticePoint, cap: int = DEFAULT_CAP) -> float:
    """Exact route length in Z^d (L1 metric) from ``x`` to ``y`` through ``stops``."""
    pts = [x, y, *sorted(set(stops) - {x, y})]
    m = metric_from_points(pts)
    return held_karp(m.dist, 0, range(2, len(pts)), 1, cap=cap)


def lattice_tau(u: LamplighterPoint, v: LamplighterPoint, cap: int = DEFAULT_CAP) -> float:
    return lattice_tsp(u.pos, u.lamps ^ v.lamps, v.pos, cap=cap)


# ----------------------------------------------------------------------------
# truncated multi-scale embedding
# ----------------------------------------------------------------------------


# scale 3 would need FRT trees on a 256 x 256 grid (65536 points)
MAX_LEVELS = 2
SUBSAMPLED_TRANSLATES = 256


def scale_width(k: int) -> int:
    """Grid side at scale ``k``: ``2**(2**k)``."""
    return 2 ** (2 ** k)


@dataclass
class ScaleEmbedding:
    """The grid embedding used at one scale, normalised to be 1-Lipschitz for tau.

    Each tree block satisfies ``tau/2 <= ||g(u)-g(v)|| <= 3 tau`` on its tree,
    so after averaging over an ensemble with expected stretch ``D`` the map
    lies between ``tau/2`` and ``3 D tau``.  Dividing by ``3 D`` gives a
    1-Lipschitz map whose lower constant is ``1 / (6 D)``.
    """

    k: int
    width: int
    d: int
    ensemble: StochasticEmbedding
    stretch: float
    translates: list
    subsampled: bool
    _packed: PackedEnsemble | None = field(default=None, repr=False)

    @property
    def lipschitz_scale(self) -> float:
        return 1.0 / (3.0 * self.stretch)

    @property
    def lower_constant(self) -> float:
        """``K`` with ``||f(u) - f(v)|| >= tau(u, v) / K``."""
        return 6.0 * self.stretch

    def index(self, p: LamplighterPoint) -> LamplighterPoint:
        return LamplighterPoint((grid_index(a, self.width) for a in p.lamps), grid_index(p.pos, self.width))

    def embed(self, p: LamplighterPoint) -> SparseVector:
        """1-Lipschitz image of a grid lamplighter point (coordinates as tuples)."""
        q = self.index(p)
        s = self.lipschitz_scale
        parts = [
            (s * float(prob) * embed_ts_tree(e.tree, lift_point(e, q), check=False)).tagged(i)
            for i, (prob, e) in enumerate(self.ensemble)
        ]
        return SparseVector.concat(parts)

    @property
    def packed(self) -> PackedEnsemble:
        if self._packed is None:
            self._packed = PackedEnsemble(self.ensemble)
        return self._packed

    def distance(self, u: LamplighterPoint, v: LamplighterPoint) -> float:
        return self.lipschitz_scale * self.packed.ts_distance(self.index(u), self.index(v))

    def reference_distance(self, u: LamplighterPoint, v: LamplighterPoint) -> float:
        qu, qv = self.index(u), self.index(v)
        total = math.fsum(
            float(p) * ts_tree_distance(e.tree, lift_point(e, qu), lift_point(e, qv)) for p, e in self.ensemble
        )
        return self.lipschitz_scale * total


class CoarseEmbedding:
    """``h = sum_k g_k / k**2`` truncated at ``levels`` scales.

    ``g_k`` averages the scale-``k`` grid embedding over translates ``v`` of
    the folding; scale ``k`` uses grids of side ``2**(2**k)``.  When a scale
    has more than ``translate_cap`` translates a seeded subsample replaces the
    full average and the scale is flagged as subsampled.
    """

    def __init__(self, d: int = 2, levels: int = 2, samples: int = 16, seed: int = 0,
                 translate_cap: int = SUBSAMPLED_TRANSLATES):
        if d < 2:
            raise MetricError("lattice dimension must be at least 2")
        if not 1 <= levels <= MAX_LEVELS:
            raise CapExceeded(levels, MAX_LEVELS, "coarse levels requested; the supported range is 1 to a maximum")
        self.d = d
        self.levels = levels
        self.samples = samples
        self.seed = seed
        self.scales: list[ScaleEmbedding] = []
        for k in range(1, levels + 1):
            width = scale_width(k)
            m = shortest_path_metric(grid_graph((width,) * d))
            se = frt_ensemble(m, samples, (seed * 1000003 + k) & (2**63 - 1))
            stretch = float(expected_stretch(se, m)[0])
            all_v = list(itertools.product(range(width), repeat=d))
            subsampled = len(all_v) > translate_cap
            if subsampled:
                rng = make_rng(seed, k, 0x7A)
                pick = sorted(rng.choice(len(all_v), size=translate_cap, replace=False).tolist())
                all_v = [all_v[i] for i in pick]
            self.scales.append(ScaleEmbedding(k, width, d, se, stretch, all_v, subsampled))

    @property
    def lipschitz_bound(self) -> float:
        return math.fsum(1.0 / k**2 for k in range(1, self.levels + 1))

    def scale(self, k: int) -> ScaleEmbedding:
        return self.scales[k - 1]

    def embed(self, p: LamplighterPoint) -> SparseVector:
        parts = []
        for sc in self.scales:
            w = 1.0 / (sc.k**2 * len(sc.translates))
            for v in sc.translates:
                parts.append((w * sc.embed(fold_ts(sc.width, self.d, v, p))).tagged((sc.k, v)))
        return SparseVector.concat(parts)

    def scale_distance(self, k: int, u: LamplighterPoint, v: LamplighterPoint) -> float:
        """``||g_k(u) - g_k(v)||_1`` (translate average, no ``1/k**2``)."""
        sc = self.scale(k)
        total = math.fsum(
            sc.distance(fold_ts(sc.width, self.d, t, u), fold_ts(sc.width, self.d, t, v)) for t in sc.translates
        )
        return total / len(sc.translates)

    def distance(self, u: LamplighterPoint, v: LamplighterPoint) -> float:
        return math.fsum(self.scale_distance(sc.k, u, v) / sc.k**2 for sc in self.scales)

    def lower_bound(self, tau_value: float) -> tuple[int, float] | None:
        """Scale-``k`` lower bound for a pair at tau distance ``tau_value``.

        Returns ``(k, bound)`` for the ``k`` with ``2**(2**(k-1)) < tau <= 2**(2**k)``
        when scale ``k+1`` is available, else ``None``.
        """
        k = bucket_of(tau_value)
        if k is None or k + 1 > self.levels:
            return None
        K = self.scale(k + 1).lower_constant
        bound = (0.75 ** self.d) * tau_value / (K * (k + 1) ** 2 * 2 ** (k + 1))
        return k, bound

    def describe(self) -> dict:
        return {
            "d": self.d,
            "levels": self.levels,
            "samples": self.samples,
            "seed": self.seed,
            "scales": [
                {
                    "k": sc.k,
                    "width": sc.width,
                    "stretch": sc.stretch,
                    "lower_constant": sc.lower_constant,
                    "translates": len(sc.translates),
                    "subsampled": sc.subsampled,
                }
                for sc in self.scales
            ],
        }


def bucket_of(tau_value: float) -> int | None:
    """``k >= 1`` with ``2**(2**(k-1)) < tau <= 2**(2**k)``; ``None`` for ``tau <= 2``."""
    if tau_value <= 2:
        return None
    k = 1
    while tau_value > 2 ** (2 ** k):
        k += 1
    return k


def cell_fraction_bound(width: int, spread: float) -> float:
    """``(width - spread) / width``, the share of translates keeping a set inside one cell."""
    return (width - spread) / width


def confined_translates(width: int, d: int, points: Sequence[LatticePoint]) -> int:
    """Count translates ``v`` for which every point lands in a single cell."""
    count = 0
    for v in itertools.product(range(width), repeat=d):
        if len({cell_of(width, v, p) for p in points}) == 1:
            count += 1
    return count


# ----------------------------------------------------------------------------
# checks of the folding lemma and the coarse bounds
# ----------------------------------------------------------------------------


def fold_coords(n: int, v: Sequence[int], coords: np.ndarray) -> np.ndarray:
    """Vectorised pointwise fold of an integer array whose last axis is the dimension."""
    z = np.asarray(coords) - np.asarray(v)
    i, j = np.divmod(z, n)
    return np.where(i % 2 == 0, j, n - j - 1)


@dataclass
class CheckResult:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)
    worst: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        out = {"check": self.name, "checked": self.checked, "violations": len(self.violations),
               "worst": self.worst, "ok": self.ok}
        out.update(self.extra)
        return out


def _combination_array(n: int, r: int) -> np.ndarray:
    combos = list(itertools.combinations(range(n), r))
    return np.array(combos, dtype=np.int64).reshape(len(combos), r)


def check_cell_isometry(n: int = 4, d: int = 2, block: int = 3, max_symmdiff: int = 4,
                        v: LatticePoint | None = None) -> CheckResult:
    """tau is unchanged by folding for every pair confined to one cell of the block.

    Every ``(x, C, y)`` with ``x, y`` and ``C`` (``|C| <= max_symmdiff``) inside
    one of the ``block**d`` cells is checked; tau depends on a pair only
    through ``(x, A ^ B, y)``.  Both sides use the batched exact solver.
    """
    v = tuple(v or (0,) * d)
    res = CheckResult("cell_isometry", extra={"n": n, "d": d, "block": block, "max_symmdiff": max_symmdiff})
    base = np.array(list(itertools.product(range(n), repeat=d)))
    for s in itertools.product(range(-(block // 2), block - block // 2), repeat=d):
        cell = base + n * np.array(s) + np.array(v)
        idx = np.arange(len(cell))
        pairs = np.array(list(itertools.product(idx, idx)))
        for r in range(max_symmdiff + 1):
            subsets = _combination_array(len(idx), r)
            xs = np.repeat(pairs[:, 0], len(subsets))
            ys = np.repeat(pairs[:, 1], len(subsets))
            cs = np.tile(subsets, (len(pairs), 1))
            for lo in range(0, len(xs), 200_000):
                sl = slice(lo, lo + 200_000)
                x, y, c = cell[xs[sl]], cell[ys[sl]], cell[cs[sl]]
                before = tsp_exact_batch(x, c, y)
                after = tsp_exact_batch(fold_coords(n, v, x), fold_coords(n, v, c), fold_coords(n, v, y))
                gap = np.abs(before - after)
                res.checked += len(gap)
                res.worst = max(res.worst, float(gap.max()))
                for k in np.nonzero(gap > 1e-9)[0][:10].tolist():
                    res.violations.append((tuple(x[k]), [tuple(p) for p in c[k]], tuple(y[k])))
    return res


def check_confined_fold_matches_pointwise(n: int, d: int, v: LatticePoint, samples: int, seed: int) -> CheckResult:
    """On one cell the set fold is the pointwise fold (no cancellations)."""
    rng = make_rng(seed, 0xCE11)
    res = CheckResult("confined_fold_pointwise")
    for _ in range(samples):
        s = rng.integers(-3, 4, size=d)
        pts = {tuple(int(a) for a in n * s + np.asarray(v) + rng.integers(0, n, size=d))
               for _ in range(int(rng.integers(0, 6)))}
        want = frozenset(fold_lattice(n, d, v, p) for p in pts)
        res.checked += 1
        if fold_set(n, d, v, pts) != want or fold_set_by_cells(n, d, v, pts) != want:
            res.violations.append(sorted(pts))
    return res


def check_fold_lipschitz_exhaustive(n: int = 4, d: int = 2, block: int = 3, max_symmdiff: int = 1,
                                    v: LatticePoint | None = None) -> CheckResult:
    """1-Lipschitz for every ``(x, C, y)`` in the whole block with ``|C| <= max_symmdiff``.

    For ``|C| <= 1`` the set fold is the pointwise fold, so the batched
    solver is applied to folded coordinates directly.
    """
    if max_symmdiff > 1:
        raise MetricError("exhaustive block-wide check only covers |A^B| <= 1")
    v = tuple(v or (0,) * d)
    res = CheckResult("fold_lipschitz_block", extra={"n": n, "d": d, "block": block, "max_symmdiff": max_symmdiff})
    lo = -(block // 2) * n
    pts = np.array(list(itertools.product(range(lo, lo + block * n), repeat=d))) + np.array(v)
    idx = np.arange(len(pts))
    xy = np.array(list(itertools.product(idx, idx)))
    for r in range(max_symmdiff + 1):
        subsets = _combination_array(len(idx), r)
        for start in range(0, len(subsets), max(1, 400_000 // len(xy))):
            sub = subsets[start: start + max(1, 400_000 // len(xy))]
            xs = np.repeat(xy[:, 0], len(sub))
            ys = np.repeat(xy[:, 1], len(sub))
            cs = np.tile(sub, (len(xy), 1))
            x, y, c = pts[xs], pts[ys], pts[cs]
            before = tsp_exact_batch(x, c, y)
            after = tsp_exact_batch(fold_coords(n, v, x), fold_coords(n, v, c), fold_coords(n, v, y))
            excess = after - before
            res.checked += len(excess)
            res.worst = max(res.worst, float(excess.max()))
            for k in np.nonzero(excess > 1e-9)[0][:10].tolist():
                res.violations.append((tuple(x[k]), [tuple(p) for p in c[k]], tuple(y[k])))
    return res


def random_lattice_point(rng, d: int, radius: int) -> LatticePoint:
    return tuple(int(a) for a in rng.integers(-radius, radius + 1, size=d))


def random_lattice_pair(rng, d: int, radius: int, max_lamps: int, max_symmdiff: int, spread: int | None = None):
    """Random pair of lattice lamplighter points with ``|A ^ B| <= max_symmdiff``.

    With ``spread`` the symmetric difference and ``y`` stay within that L_inf
    distance of ``x``.
    """
    x = random_lattice_point(rng, d, radius)

    def near():
        if spread is None:
            return random_lattice_point(rng, d, radius)
        return tuple(a + int(b) for a, b in zip(x, rng.integers(-spread, spread + 1, size=d)))

    lamps_a = {random_lattice_point(rng, d, radius) for _ in range(int(rng.integers(0, max_lamps + 1)))}
    flips = {near() for _ in range(int(rng.integers(0, max_symmdiff + 1)))}
    y = near()
    return LamplighterPoint(lamps_a, x), LamplighterPoint(lamps_a ^ flips, y)


def check_fold_lipschitz_sampled(n: int, d: int, samples: int, seed: int, radius: int = 12,
                                 max_symmdiff: int = 4) -> CheckResult:
    """tau(fold u, fold v) <= tau(u, v) on random pairs and random translates."""
    rng = make_rng(seed, 0xF01D)
    res = CheckResult("fold_lipschitz_sampled", extra={"n": n, "d": d, "max_symmdiff": max_symmdiff})
    for _ in range(samples):
        u, w = random_lattice_pair(rng, d, radius, 4, max_symmdiff)
        v = tuple(int(a) for a in rng.integers(0, n, size=d))
        before = lattice_tau(u, w)
        after = lattice_tau(fold_ts(n, d, v, u), fold_ts(n, d, v, w))
        res.checked += 1
        res.worst = max(res.worst, after - before)
        if after > before + 1e-9:
            res.violations.append((u, w, v, before, after))
    return res


def check_set_identities(n: int, d: int, samples: int, seed: int, radius: int = 12) -> CheckResult:
    """``sigma(A) ^ sigma(B) == sigma(A ^ B)`` and ``sigma(A) ^ sigma(B) <= psi(A ^ B)``."""
    rng = make_rng(seed, 0x5E7)
    res = CheckResult("set_identities", extra={"n": n, "d": d})
    for _ in range(samples):
        a = {random_lattice_point(rng, d, radius) for _ in range(int(rng.integers(0, 9)))}
        b = {random_lattice_point(rng, d, radius) for _ in range(int(rng.integers(0, 9)))}
        v = tuple(int(x) for x in rng.integers(0, n, size=d))
        left = fold_set_by_cells(n, d, v, a) ^ fold_set_by_cells(n, d, v, b)
        image = {fold_lattice(n, d, v, p) for p in a ^ b}
        res.checked += 1
        if left != fold_set_by_cells(n, d, v, a ^ b) or not left <= image:
            res.violations.append((sorted(a), sorted(b), v))
    return res


def check_walk_shortening(n: int, d: int, samples: int, seed: int, radius: int = 12, max_stops: int = 6) -> CheckResult:
    """``tsp(psi x, psi C, psi y) <= tsp(x, C, y)`` for random routes."""
    rng = make_rng(seed, 0x3A1C)
    res = CheckResult("walk_shortening", extra={"n": n, "d": d})
    for _ in range(samples):
        x = random_lattice_point(rng, d, radius)
        y = random_lattice_point(rng, d, radius)
        stops = {random_lattice_point(rng, d, radius) for _ in range(int(rng.integers(0, max_stops + 1)))}
        v = tuple(int(a) for a in rng.integers(0, n, size=d))
        before = lattice_tsp(x, stops, y)
        after = lattice_tsp(fold_lattice(n, d, v, x), {fold_lattice(n, d, v, p) for p in stops},
                            fold_lattice(n, d, v, y))
        res.checked += 1
        res.worst = max(res.worst, after - before)
        if after > before + 1e-9:
            res.violations.append((x, sorted(stops), y, v))
    return res


BUCKETS = {0: (0.0, 2.0), 1: (2.0, 4.0), 2: (4.0, 16.0)}


def bucket_pairs(bucket: int, count: int, d: int, seed: int, radius: int = 8) -> list[tuple]:
    """Random pairs with tau in the bucket's half-open range ``(lo, hi]``."""
    lo, hi = BUCKETS[bucket]
    rng = make_rng(seed, 0xB0C, bucket)
    spread = {0: 1, 1: 2, 2: 4}[bucket]
    out = []
    while len(out) < count:
        u, v = random_lattice_pair(rng, d, radius, 3, 1 + 2 * bucket, spread=spread)
        if u == v:
            continue
        t = lattice_tau(u, v)
        if lo < t <= hi:
            out.append((u, v, t))
    return out


def check_coarse_bounds(ce: CoarseEmbedding, pairs: Sequence[tuple]) -> CheckResult:
    """Lipschitz upper bound and (where a larger scale exists) the scale lower bound."""
    res = CheckResult("coarse_bounds", extra={"lipschitz_bound": ce.lipschitz_bound, "lower_checked": 0,
                                              "min_lower_ratio": math.inf, "max_upper_ratio": 0.0})
    for u, v, t in pairs:
        gap = ce.distance(u, v)
        res.checked += 1
        if t > 0:
            res.extra["max_upper_ratio"] = max(res.extra["max_upper_ratio"], gap / t)
        if gap > ce.lipschitz_bound * t + 1e-9:
            res.violations.append(("upper", u, v, gap, t))
        lb = ce.lower_bound(t)
        if lb is None:
            continue
        k, bound = lb
        width = scale_width(k + 1)
        support = list(u.lamps ^ v.lamps) + [u.pos, v.pos]
        spread = max(sum(abs(a - b) for a, b in zip(p, q)) for p in support for q in support)
        share = cell_fraction_bound(width, spread)
        confined = confined_translates(width, ce.d, support)
        res.extra["lower_checked"] += 1
        res.extra["min_lower_ratio"] = min(res.extra["min_lower_ratio"], gap / bound)
        if share < 0.75 or confined < (width - spread) ** ce.d:
            res.violations.append(("cells", u, v, spread, confined))
        if gap < bound - 1e-12:
            res.violations.append(("lower", u, v, gap, bound))
    return res
