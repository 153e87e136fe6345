"""Seeded experiment driver and machine-readable reports.

An :class:`ExperimentConfig` names a graph family, an embedder and the checks
to run.  :func:`run` returns one flat row per suite.  Rows carry the seed,
cap and tolerance used, and by default nothing time-dependent, so that the
same config always yields the same report bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .free_space import lf_l1_embedding, lf_norm, lf_norm_tree, lift_molecule, random_molecule, Molecule
from .generators import FAMILIES, generate
from .lifting import check_lifting, exhaustive_pipeline_distortion, pipeline_distortion, sampled_pairs, small_points
from .metric import TOL, MetricError, _jsonable, distortion_from_arrays, shortest_path_metric
from .stochastic import (
    StochasticEmbedding,
    expected_stretch,
    frt_ensemble,
    identity_tree_embedding,
    karp_cycle_embedding,
    make_rng,
    verify_domination,
)
from .trees import WeightedTree
from .tsp import DEFAULT_CAP, TauCache

SCHEMA_VERSION = 1
EMBEDDERS = ("frt", "karp", "identity_tree")
SUITES = ("core", "freespace", "fold", "coarse")
POLICIES = ("sampled", "exhaustive")

# Frozen column order of the CSV report.  JSON rows use the same keys in the
# same order, plus nested witness fields.
CSV_FIELDS = (
    "schema_version", "suite", "family", "n", "d", "k", "embedder", "samples", "seed",
    "pair_policy", "pairs", "max_symmdiff", "max_lamps", "cap", "tol",
    "points", "D_measured", "D_pair", "bound", "pipeline_distortion", "expansion", "contraction",
    "domination_violations", "lifting_pairs", "lifting_violations", "worst_average_ratio",
    "molecules", "flow_tree_mismatch", "molecule_domination_violations", "molecule_average_violations",
    "dipole_distortion", "metric_distortion",
    "check", "checked", "violations", "scale", "bucket", "lower_checked", "min_lower_ratio",
    "max_upper_ratio", "lipschitz_bound", "subsampled",
    "passed", "runtime_s",
)


@dataclass
class ExperimentConfig:
    family: str = "cycle"
    n: int | None = None
    d: int | None = None
    k: int | None = None
    path: str | None = None
    embedder: str = "frt"
    samples: int = 200
    seed: int = 0
    pair_policy: str = "sampled"
    pairs: int = 200
    max_symmdiff: int = 4
    max_lamps: int = 2
    cap: int = DEFAULT_CAP
    tol: float = TOL
    suites: tuple = ("core",)
    timing: bool = False

    def __post_init__(self):
        self.suites = tuple(self.suites)
        self.validate()

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise MetricError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if self.embedder not in EMBEDDERS:
            raise MetricError(f"unknown embedder {self.embedder!r}; choose from {', '.join(EMBEDDERS)}")
        if self.embedder == "karp" and self.family != "cycle":
            raise MetricError("the karp embedder needs family=cycle")
        if self.embedder == "identity_tree" and self.family not in ("path", "random_tree", "file"):
            raise MetricError("the identity_tree embedder needs a tree family (path, random_tree, file)")
        if self.samples < 1:
            raise MetricError("samples must be at least 1")
        if self.pair_policy not in POLICIES:
            raise MetricError(f"pair policy must be one of {POLICIES}")
        if self.pairs < 1:
            raise MetricError("pairs must be at least 1")
        bad = [s for s in self.suites if s not in SUITES]
        if bad or not self.suites:
            raise MetricError(f"unknown suites {bad}; choose from {', '.join(SUITES)}")
        if not 0 <= self.seed < 2**64:
            raise MetricError("seed must be a 64-bit unsigned integer")

    @property
    def params(self) -> dict:
        return {key: getattr(self, key) for key in ("n", "d", "k", "path") if getattr(self, key) is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise MetricError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    def echo(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "family": self.family,
            "n": self.n,
            "d": self.d,
            "k": self.k,
            "embedder": self.embedder,
            "samples": self.samples,
            "seed": self.seed,
            "pair_policy": self.pair_policy,
            "pairs": self.pairs,
            "max_symmdiff": self.max_symmdiff,
            "max_lamps": self.max_lamps,
            "cap": self.cap,
            "tol": self.tol,
        }


def build_embedding(cfg: ExperimentConfig, graph, metric) -> StochasticEmbedding:
    if cfg.embedder == "frt":
        return frt_ensemble(metric, cfg.samples, cfg.seed)
    if cfg.embedder == "karp":
        if not graph.is_unit:
            raise MetricError("the karp embedder needs a unit-weight cycle")
        return karp_cycle_embedding(graph.n)
    return identity_tree_embedding(WeightedTree.from_edges(graph.n, graph.edges, 0))


# ----------------------------------------------------------------------------
# suites
# ----------------------------------------------------------------------------


def _core(cfg, graph, m, se, cache) -> dict:
    dom = verify_domination(se, m, cfg.tol)
    exact = cfg.embedder == "karp"
    D, D_pair = expected_stretch(se, m, exact=exact)
    if cfg.pair_policy == "exhaustive":
        pts = small_points(m.n, cfg.max_lamps)
        rep = exhaustive_pipeline_distortion(se, m, pts, cfg.cap)
        sample = [(u, v) for u in pts for v in pts if u != v and len(u.lamps ^ v.lamps) <= cfg.max_symmdiff]
        n_points = len(pts)
    else:
        sample = sampled_pairs(m.n, cfg.pairs, cfg.max_symmdiff, cfg.seed)
        rep = pipeline_distortion(se, m, sample, cfg.cap, cache)
        n_points = None
    lift = check_lifting(se, m, sample, float(D), cfg.cap, cfg.tol)
    bound = 6.0 * float(D)
    passed = not dom and lift.ok and rep.distortion <= bound + 1e-6
    return {
        "suite": "core",
        "points": n_points,
        "D_measured": float(D),
        "D_exact": str(D) if exact else None,
        "D_pair": list(D_pair),
        "bound": bound,
        "pipeline_distortion": rep.distortion,
        "expansion": rep.expansion,
        "contraction": rep.contraction,
        "expansion_witness": _jsonable(rep.expansion_pair),
        "contraction_witness": _jsonable(rep.contraction_pair),
        "domination_violations": len(dom),
        "lifting_pairs": lift.pairs,
        "lifting_violations": len(lift.domination_violations) + len(lift.average_violations),
        "worst_average_ratio": lift.worst_average_ratio,
        "violation_witnesses": _jsonable(dom[:5] + lift.domination_violations[:5] + lift.average_violations[:5]),
        "passed": passed,
    }


def _freespace(cfg, graph, m, se, D) -> dict:
    rng = make_rng(cfg.seed, 0xF5)
    mismatch = 0.0
    dom_bad, avg_bad = [], []
    comps = list(se)
    for _ in range(cfg.pairs):
        mu = random_molecule(m.n, rng)
        base = lf_norm(m, mu)
        total = 0.0
        slack = cfg.tol * max(1.0, base)
        for i, (p, e) in enumerate(comps):
            lifted = lift_molecule(e, mu)
            tree_value, _ = lf_norm_tree(e.tree, lifted)
            flow_value = lf_norm(e.tree.metric(), lifted)
            mismatch = max(mismatch, abs(tree_value - flow_value))
            if tree_value < base - slack:
                dom_bad.append((i, dict(mu), tree_value, base))
            total += float(p) * tree_value
        if total > D * base + slack:
            avg_bad.append((dict(mu), total, base))
    iu, ju = np.triu_indices(m.n, k=1)
    dip = np.array([lf_l1_embedding(se, Molecule.dipole(i, j)).norm1() for i, j in zip(iu.tolist(), ju.tolist())])
    src = m.dist[iu, ju]
    dipole = distortion_from_arrays(src, dip)
    metric = distortion_from_arrays(src, se.expected_distances[iu, ju])
    passed = (
        mismatch <= 1e-9 and not dom_bad and not avg_bad
        and abs(dipole.distortion - metric.distortion) <= 1e-9 * max(1.0, metric.distortion)
    )
    return {
        "suite": "freespace",
        "molecules": cfg.pairs,
        "flow_tree_mismatch": mismatch,
        "molecule_domination_violations": len(dom_bad),
        "molecule_average_violations": len(avg_bad),
        "dipole_distortion": dipole.distortion,
        "metric_distortion": metric.distortion,
        "D_measured": D,
        "violation_witnesses": _jsonable((dom_bad + avg_bad)[:5]),
        "passed": passed,
    }


def _fold_rows(cfg) -> list[dict]:
    from . import folding

    n = cfg.n or 4
    d = cfg.d or 2
    results = [
        folding.check_cell_isometry(n, d, block=3, max_symmdiff=cfg.max_symmdiff),
        folding.check_fold_lipschitz_exhaustive(n, d, block=3, max_symmdiff=1),
        folding.check_fold_lipschitz_sampled(n, d, cfg.pairs, cfg.seed, max_symmdiff=cfg.max_symmdiff),
        folding.check_set_identities(n, d, cfg.pairs, cfg.seed),
        folding.check_walk_shortening(n, d, cfg.pairs, cfg.seed),
        folding.check_confined_fold_matches_pointwise(n, d, (0,) * d, cfg.pairs, cfg.seed),
    ]
    rows = []
    for r in results:
        rows.append({
            "suite": "fold",
            "check": r.name,
            "checked": r.checked,
            "violations": len(r.violations),
            "violation_witnesses": _jsonable(r.violations[:5]),
            "passed": r.ok,
        })
    return rows


def _coarse_rows(cfg) -> list[dict]:
    from . import folding

    d = cfg.d or 2
    levels = cfg.k or 2
    ce = folding.CoarseEmbedding(d, levels, cfg.samples, cfg.seed)
    rows = []
    for sc in ce.describe()["scales"]:
        rows.append({
            "suite": "coarse",
            "check": "scale",
            "scale": sc["k"],
            "D_measured": sc["stretch"],
            "bound": sc["lower_constant"],
            "checked": sc["translates"],
            "subsampled": sc["subsampled"],
            "passed": True,
        })
    for bucket in sorted(folding.BUCKETS):
        pairs = folding.bucket_pairs(bucket, cfg.pairs, d, cfg.seed)
        r = folding.check_coarse_bounds(ce, pairs)
        low = r.extra["min_lower_ratio"]
        rows.append({
            "suite": "coarse",
            "check": "bounds",
            "bucket": bucket,
            "checked": r.checked,
            "violations": len(r.violations),
            "lower_checked": r.extra["lower_checked"],
            "min_lower_ratio": None if math.isinf(low) else low,
            "max_upper_ratio": r.extra["max_upper_ratio"],
            "lipschitz_bound": r.extra["lipschitz_bound"],
            "violation_witnesses": _jsonable(r.violations[:5]),
            "passed": r.ok,
        })
    return rows


def run(cfg: ExperimentConfig) -> list[dict]:
    """Run every suite of ``cfg`` and return report rows (config echo first)."""
    rows = []
    needs_graph = any(s in cfg.suites for s in ("core", "freespace"))
    graph = m = se = cache = None
    D = None
    if needs_graph:
        graph = generate(cfg.family, cfg.params, cfg.seed)
        m = shortest_path_metric(graph)
        se = build_embedding(cfg, graph, m)
        cache = TauCache(m, cfg.cap)
        D = float(expected_stretch(se, m)[0])
    for suite in cfg.suites:
        start = time.perf_counter()
        if suite == "core":
            produced = [_core(cfg, graph, m, se, cache)]
        elif suite == "freespace":
            produced = [_freespace(cfg, graph, m, se, D)]
        elif suite == "fold":
            produced = _fold_rows(cfg)
        else:
            produced = _coarse_rows(cfg)
        elapsed = time.perf_counter() - start
        for row in produced:
            out = cfg.echo()
            out.update(row)
            if cfg.timing:
                out["runtime_s"] = round(elapsed, 3)
            rows.append(out)
    return rows


# ----------------------------------------------------------------------------
# report serialisation
# ----------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict, tuple)):
        return json.dumps(value, separators=(",", ":"))
    return str(value)


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for row in rows:
        w.writerow([_cell(row.get(k)) for k in CSV_FIELDS])
    return buf.getvalue()


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def to_json(rows: list[dict]) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, "rows": _finite(rows)}, indent=2) + "\n"


def write_report(rows: list[dict], out: str | Path | None, fmt: str = "json") -> str:
    text = to_csv(rows) if fmt == "csv" else to_json(rows)
    if out is not None and str(out) != "-":
        Path(out).write_text(text)
    return text


def load_suite(path: str | Path) -> list[ExperimentConfig]:
    """Read a suite file: a JSON object, or ``{"experiments": [...]}``."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MetricError(f"cannot read suite file {path}: {exc}") from exc
    items = data.get("experiments", [data]) if isinstance(data, dict) else data
    return [ExperimentConfig.from_dict(dict(item)) for item in items]


def config_dict(cfg: ExperimentConfig) -> dict:
    out = asdict(cfg)
    out["suites"] = list(cfg.suites)
    return out
