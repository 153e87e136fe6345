"""Exact lamplighter metrics and their L1 embeddings through random trees."""

from .metric import MetricError, MetricSpace, WeightedGraph, shortest_path_metric, validate_metric
from .tsp import CapExceeded, LamplighterPoint, TauCache, lamplighter_bfs_oracle, lamplighter_distance, tau, tsp_exact
from .trees import WeightedTree, embed_ts_tree, tsp_tree
from .stochastic import (
    StochasticEmbedding,
    TreeEmbedding,
    expected_stretch,
    frt_ensemble,
    frt_sample,
    karp_cycle_embedding,
    verify_domination,
)
from .lifting import embed_lamplighter_l1, pipeline_distortion
from .free_space import Molecule, lf_l1_embedding, lf_norm, lf_norm_tree
from .folding import CoarseEmbedding, fold_line, fold_lattice, fold_set, fold_ts
from .generators import generate
from .experiments import ExperimentConfig, run

__version__ = "0.1.0"
