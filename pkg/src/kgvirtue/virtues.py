"""The five hypothesis virtue measures.

All measures read shortest δ-paths inside the hypothesis graph, where δ is
the Euclidean distance between universe context vectors.  Larger is better
for every measure.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .cluster import ClusterLabeling
from .graph import DegenerateGraphError, GraphView, Hypothesis, PathTable, UniverseGraph, betweenness_all, edge_key

MEASURES = ("C", "M", "S1", "S2", "G", "R")


@dataclass(frozen=True)
class VirtueVector:
    conservatism: float
    modesty: float
    simplicity_local: float
    simplicity_global: float
    generality: int
    refutability: float
    k: int = 1

    def values(self) -> tuple[float, ...]:
        """Measure values in ``MEASURES`` order."""
        return (
            self.conservatism,
            self.modesty,
            self.simplicity_local,
            self.simplicity_global,
            float(self.generality),
            self.refutability,
        )

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "VirtueVector":
        return cls(
            conservatism=float(d["conservatism"]),
            modesty=float(d["modesty"]),
            simplicity_local=float(d["simplicity_local"]),
            simplicity_global=float(d["simplicity_global"]),
            generality=int(d["generality"]),
            refutability=float(d["refutability"]),
            k=int(d.get("k", 1)),
        )


def _table(hypothesis, delta) -> PathTable:
    return PathTable(hypothesis, delta)


def conservatism(hypothesis, delta, table: PathTable | None = None) -> float:
    """Mean over shortest paths of endpoint distance / path length."""
    table = table or _table(hypothesis, delta)
    pairs = list(table.pairs())
    if not pairs:
        raise DegenerateGraphError("no shortest paths")
    order, euclid = delta.pairwise(table.order)
    assert order == table.order
    i = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
    j = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
    ratios = euclid[i, j] / table.dist[i, j]
    return float(math.fsum(ratios) / len(pairs))


def modesty(hypothesis) -> float:
    """Inverse edge density ``|V|(|V|-1) / 2|E|``."""
    nv = len(hypothesis.vertices)
    ne = len(hypothesis.edges) if isinstance(hypothesis, Hypothesis) else len(hypothesis.edges())
    if ne == 0:
        raise DegenerateGraphError("modesty needs at least one edge")
    return nv * (nv - 1) / (2 * ne)


def cluster_entropy(vertices: Iterable[int], labeling: ClusterLabeling) -> float:
    """Cluster association entropy (base 2) of a vertex set.

    ``p(l)`` is the share of vertices carrying label ``l``.  With
    overlapping clusters the shares need not sum to one.
    """
    vertices = list(vertices)
    if not vertices:
        raise ValueError("entropy of an empty vertex set")
    counts: dict[str, int] = {}
    for v in vertices:
        for l in labeling[v]:
            counts[l] = counts.get(l, 0) + 1
    n = len(vertices)
    total = 0.0
    for l in sorted(counts):
        p = counts[l] / n
        total -= p * math.log2(p)
    return total + 0.0


def simplicity_local(hypothesis, labeling: ClusterLabeling) -> float:
    return cluster_entropy(hypothesis.vertices, labeling)


def simplicity_global(hypothesis, universe, labeling: ClusterLabeling) -> float:
    """Universe simplification rate ``E(U minus H) / E(U)``."""
    rest = universe.vertices - hypothesis.vertices
    if not rest:
        raise DegenerateGraphError("hypothesis covers the whole universe")
    base = cluster_entropy(universe.vertices, labeling)
    if base == 0.0:
        raise DegenerateGraphError("universe has zero cluster entropy")
    return cluster_entropy(rest, labeling) / base


def frontier(hypothesis, universe: UniverseGraph) -> tuple[set[int], list[tuple[int, int]]]:
    """Adjacent outside vertices and the universe edges connecting them."""
    inside = hypothesis.vertices
    edges = sorted(
        edge_key(v, u) for v in inside for u in universe.adjacency[v] if u not in inside
    )
    outside = {u for e in edges for u in e if u not in inside}
    return outside, edges


def generality(hypothesis, universe: UniverseGraph) -> int:
    """``|E_A| * |V_H|`` -- frontier edges times hypothesis size."""
    _, edges = frontier(hypothesis, universe)
    return len(edges) * len(hypothesis.vertices)


def generality_by_paths(hypothesis, universe: UniverseGraph, delta) -> int:
    """Explicit enumeration of explanation paths for adjacent vertices.

    Each frontier edge ``(u, v)`` with ``u`` outside contributes the path
    ``(u, v)`` and ``u`` prepended to the canonical shortest path from
    ``v`` to every other hypothesis vertex.  Only hypothesis vertices
    follow the starting vertex.
    """
    _, edges = frontier(hypothesis, universe)
    table = _table(hypothesis, delta)
    found = set()
    for a, b in edges:
        u, v = (a, b) if b in hypothesis.vertices else (b, a)
        found.add((u, v))
        for w in hypothesis.vertices:
            if w == v:
                continue
            p = table.path(v, w).vertices
            if p[0] != v:
                p = tuple(reversed(p))
            found.add((u,) + p)
    assert all(all(x in hypothesis.vertices for x in p[1:]) for p in found)
    return len(found)


def refutability(hypothesis, delta, k: int = 1, table: PathTable | None = None) -> float:
    """Top-k refutability over shortest paths.

    Repeatedly removes the vertex of highest betweenness (smallest id on
    ties), recomputing betweenness on the shrunken graph, and sums the
    surviving shortest-path counts into the denominator.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    graph = hypothesis.view() if isinstance(hypothesis, Hypothesis) else GraphView(hypothesis.vertices, hypothesis.adjacency)
    table = table or _table(graph, delta)
    base = table.path_count()
    if base == 0:
        raise DegenerateGraphError("no shortest paths")
    remaining = 0
    for _ in range(k):
        if table.path_count() == 0:
            break
        cb = betweenness_all(graph, delta, table)
        top = max(sorted(cb), key=lambda v: cb[v])
        graph = graph.without(top)
        table = _table(graph, delta)
        remaining += table.path_count()
    return base / (base + remaining)


def score(
    hypothesis,
    universe: UniverseGraph,
    labeling: ClusterLabeling,
    delta,
    k: int = 1,
    empty_remainder_ok: bool = False,
) -> VirtueVector:
    """All six measures of one hypothesis.

    With ``empty_remainder_ok`` a hypothesis covering the whole universe
    gets ``S2 = 0`` (the empty remainder carries no entropy) instead of an
    error; the refinement loop and solution ranking rely on this.
    """
    table = _table(hypothesis, delta)
    if empty_remainder_ok and not (universe.vertices - hypothesis.vertices):
        if cluster_entropy(universe.vertices, labeling) == 0.0:
            raise DegenerateGraphError("universe has zero cluster entropy")
        s2 = 0.0
    else:
        s2 = simplicity_global(hypothesis, universe, labeling)
    return VirtueVector(
        conservatism=conservatism(hypothesis, delta, table),
        modesty=modesty(hypothesis),
        simplicity_local=simplicity_local(hypothesis, labeling),
        simplicity_global=s2,
        generality=generality(hypothesis, universe),
        refutability=refutability(hypothesis, delta, k, table),
        k=k,
    )
