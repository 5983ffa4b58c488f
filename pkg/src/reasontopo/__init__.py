"""Topological analysis of reasoning traces.

Reasoning steps become a structure-aware point cloud, the point cloud
becomes a Vietoris-Rips filtration, and persistent homology of that
filtration is summarised by bar counts, lifetime statistics and
persistent entropy.
"""

from .chain import (Paradigm, ReasoningChain, ReasoningStep, View, adjacency_matrix, parse_chain,
                    select_view, serialize_chain)
from .complex import DistanceMatrix, FilteredSimplex, Filtration, build_rips, distance_matrix
from .embedding import EmbeddedChain, EmbeddingSet, attach, fetch_embeddings, load_embeddings
from .encoding import (PointCloud, SpectralDecomposition, depth_branch_pe, encode_chain, laplacian_pe,
                       sinusoidal_pe, symmetric_eigen)
from .metrics import (TopologyReport, build_report, feature_count, lifetime_stats, persistent_entropy,
                      stable_component_count)
from .persistence import (PersistenceBar, PersistenceDiagram, betti_at, brute_force_betti,
                          compute_persistence)
from .pipeline import AnalysisConfig, analyze

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig", "DistanceMatrix", "EmbeddedChain", "EmbeddingSet", "FilteredSimplex", "Filtration",
    "Paradigm", "PersistenceBar", "PersistenceDiagram", "PointCloud", "ReasoningChain", "ReasoningStep",
    "SpectralDecomposition", "TopologyReport", "View", "adjacency_matrix", "analyze", "attach",
    "betti_at", "brute_force_betti", "build_report", "build_rips", "compute_persistence",
    "depth_branch_pe", "distance_matrix", "encode_chain", "feature_count", "fetch_embeddings",
    "laplacian_pe", "lifetime_stats", "load_embeddings", "parse_chain", "persistent_entropy",
    "select_view", "serialize_chain", "sinusoidal_pe", "stable_component_count", "symmetric_eigen",
]
