"""Hypothesis virtues for knowledge-graph refinement.

The pipeline turns co-occurrence statements into a weighted universe
graph, clusters its vertices, evolves high-virtue subgraphs with a
genetic algorithm and evaluates generations against discovery tasks.
"""

from .graph import (
    CanonicalPath,
    ContextVectors,
    DegenerateGraphError,
    DistanceOracle,
    GraphError,
    GraphStats,
    Hypothesis,
    UniverseGraph,
    betweenness,
    build_context_vectors,
    euclidean_distance,
    graph_stats,
    shortest_paths,
)
from .virtues import VirtueVector, score

__version__ = "0.1.0"

__all__ = [
    "CanonicalPath",
    "ContextVectors",
    "DegenerateGraphError",
    "DistanceOracle",
    "GraphError",
    "GraphStats",
    "Hypothesis",
    "UniverseGraph",
    "VirtueVector",
    "betweenness",
    "build_context_vectors",
    "euclidean_distance",
    "graph_stats",
    "score",
    "shortest_paths",
]
