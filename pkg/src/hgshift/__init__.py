"""Mode seeking on weighted hypergraphs with probabilistic incidence.

A mode is a local maximizer of the density ``p @ M @ p`` over the simplex of
hyperedge distributions, where ``M`` is the hyperedge-adjacency matrix.
Replicator dynamics find a local mode inside a subhypergraph; voting-based
expansion steps move it outward until the KKT conditions hold globally.
"""
from .clustering import (
    ClusterConfig,
    ClusterResult,
    PointSet,
    cluster,
    cluster_points,
    gen_blobs,
    gen_crescents,
    knn_hyperedges,
    merge_modes,
    nmi,
)
from .hypergraph import (
    Hypergraph,
    HypergraphFormatError,
    build_adjacency,
    hyperedge_degree,
    intersection_mass,
    validate,
    vertex_degree,
)
from .matching import (
    CorrespondenceSet,
    MatchConfig,
    build_association_hypergraph,
    gen_matching_instance,
    match,
    matching_rate,
    pairwise_baseline,
)
from .replicator import DegenerateStartError, initial_vector, replicator_step, seek_mode
from .stqp import ModeCertificate, density, enumerate_kkt_points, is_mode
from .voting import (
    ShiftConfig,
    ShiftResult,
    direction_vector,
    dominant_seed_distribution,
    expansion_step,
    hypergraph_shift,
    subset_weight,
)

__all__ = [
    "ClusterConfig", "ClusterResult", "CorrespondenceSet", "DegenerateStartError", "Hypergraph",
    "HypergraphFormatError", "MatchConfig", "ModeCertificate", "PointSet", "ShiftConfig",
    "ShiftResult", "build_adjacency", "build_association_hypergraph", "cluster", "cluster_points",
    "density", "direction_vector", "dominant_seed_distribution", "enumerate_kkt_points",
    "expansion_step", "gen_blobs", "gen_crescents", "gen_matching_instance", "hyperedge_degree",
    "hypergraph_shift", "initial_vector", "intersection_mass", "is_mode", "knn_hyperedges",
    "match", "matching_rate", "merge_modes", "nmi", "pairwise_baseline", "replicator_step",
    "seek_mode", "subset_weight", "validate", "vertex_degree",
]
