"""Graph representation, distance geometry and shortest-path machinery.

Everything here operates on undirected graphs whose vertices are
non-negative integers.  Two graph flavours exist:

* :class:`UniverseGraph` -- the closed, edge-weighted world.
* :class:`Hypothesis` -- a connected subgraph of a universe.

Both expose ``vertices`` and ``adjacency`` so the path routines accept
either (or a plain :class:`GraphView`).
"""

from __future__ import annotations

import math
import statistics
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial.distance import pdist, squareform

from ._io import atomic_write_text, fmt_float

Edge = tuple[int, int]

# relative tolerance for deciding that two path lengths are tied
TIE_RTOL = 1e-9
TIE_ATOL = 1e-12


class GraphError(ValueError):
    """Invalid graph data."""


class DegenerateGraphError(GraphError):
    """A measure was asked for on a graph that has no paths."""


def edge_key(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class GraphView:
    """Minimal undirected graph: a vertex set plus neighbour sets."""

    __slots__ = ("vertices", "adjacency")

    def __init__(self, vertices: Iterable[int], adjacency: Mapping[int, Iterable[int]]):
        self.vertices = frozenset(vertices)
        self.adjacency = {v: frozenset(adjacency.get(v, ())) for v in self.vertices}

    @classmethod
    def from_edges(cls, edges: Iterable[Edge], vertices: Iterable[int] = ()) -> "GraphView":
        adj: dict[int, set[int]] = {v: set() for v in vertices}
        for u, v in edges:
            adj.setdefault(u, set()).add(v)
            adj.setdefault(v, set()).add(u)
        return cls(adj.keys(), adj)

    def edges(self) -> list[Edge]:
        return sorted({edge_key(u, v) for u in self.vertices for v in self.adjacency[u]})

    def without(self, vertex: int) -> "GraphView":
        keep = self.vertices - {vertex}
        return GraphView(keep, {v: self.adjacency[v] - {vertex} for v in keep})


class UniverseGraph:
    """Undirected edge-weighted universe with optional labeling maps.

    Weights live in (0, 1].  ``vertex_labels`` and ``edge_labels`` map a
    label name to a mapping of vertex (or edge) to value.
    """

    def __init__(
        self,
        edges: Mapping[Edge, float] | Iterable[tuple[int, int, float]],
        vertices: Iterable[int] = (),
        vertex_labels: Mapping[str, Mapping[int, object]] | None = None,
        edge_labels: Mapping[str, Mapping[Edge, object]] | None = None,
    ):
        items = edges.items() if isinstance(edges, Mapping) else (((u, v), w) for u, v, w in edges)
        weights: dict[Edge, float] = {}
        adjacency: dict[int, dict[int, float]] = {int(v): {} for v in vertices}
        for (u, v), w in items:
            u, v, w = int(u), int(v), float(w)
            if u < 0 or v < 0:
                raise GraphError(f"negative vertex id in edge ({u}, {v})")
            if u == v:
                raise GraphError(f"self-loop on vertex {u}")
            if not 0.0 < w <= 1.0:
                raise GraphError(f"weight {w} of edge ({u}, {v}) outside (0, 1]")
            key = edge_key(u, v)
            if key in weights and weights[key] != w:
                raise GraphError(f"conflicting weights for edge {key}")
            weights[key] = w
            adjacency.setdefault(u, {})[v] = w
            adjacency.setdefault(v, {})[u] = w
        self.weights = weights
        self.adjacency = adjacency
        self.vertices = frozenset(adjacency)
        self.vertex_labels = {k: dict(m) for k, m in (vertex_labels or {}).items()}
        self.edge_labels = {k: {edge_key(*e): val for e, val in m.items()} for k, m in (edge_labels or {}).items()}
        for name, m in self.vertex_labels.items():
            unknown = set(m) - self.vertices
            if unknown:
                raise GraphError(f"vertex label {name!r} references unknown vertices {sorted(unknown)[:5]}")

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        return f"UniverseGraph(|V|={len(self.vertices)}, |E|={len(self.weights)})"

    def weight(self, u: int, v: int) -> float:
        return self.weights[edge_key(u, v)]

    def has_edge(self, u: int, v: int) -> bool:
        return edge_key(u, v) in self.weights

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def neighbors(self, v: int) -> list[int]:
        return sorted(self.adjacency[v])

    def edges(self) -> list[Edge]:
        return sorted(self.weights)

    def subgraph(self, edges: Iterable[Edge]) -> "UniverseGraph":
        """Universe restricted to ``edges`` with weights and labels copied."""
        keys = sorted({edge_key(*e) for e in edges})
        sub = UniverseGraph({e: self.weights[e] for e in keys})
        sub.vertex_labels = {k: {v: m[v] for v in sub.vertices if v in m} for k, m in self.vertex_labels.items()}
        sub.edge_labels = {k: {e: m[e] for e in keys if e in m} for k, m in self.edge_labels.items()}
        return sub

    # -- serialization -----------------------------------------------------

    def to_tsv(self) -> str:
        return "".join(f"{u}\t{v}\t{fmt_float(w)}\n" for (u, v), w in sorted(self.weights.items()))

    def labels_to_tsv(self) -> str:
        lines = []
        for key in sorted(self.vertex_labels):
            for v, val in sorted(self.vertex_labels[key].items()):
                lines.append(f"{v}\t{key}\t{val}\n")
        return "".join(lines)

    def write(self, edge_path: str | Path, label_path: str | Path | None = None) -> None:
        atomic_write_text(edge_path, self.to_tsv())
        if label_path is not None:
            atomic_write_text(label_path, self.labels_to_tsv())

    @classmethod
    def read(cls, edge_path: str | Path, label_path: str | Path | None = None) -> "UniverseGraph":
        edges = []
        with open(edge_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise GraphError(f"{edge_path}:{lineno}: expected 3 tab-separated fields")
                edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
        labels: dict[str, dict[int, str]] = {}
        if label_path is not None and Path(label_path).exists():
            with open(label_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if not line:
                        continue
                    vid, key, value = line.split("\t", 2)
                    labels.setdefault(key, {})[int(vid)] = value
        return cls(edges, vertex_labels=labels)


class Hypothesis:
    """Connected subgraph of a universe, identified by its edge set.

    Raises :class:`DegenerateGraphError` for fewer than one edge and
    :class:`GraphError` for disconnected edge sets or edges missing from
    ``universe`` (when given).
    """

    __slots__ = ("edges", "vertices", "_adjacency")

    def __init__(self, edges: Iterable[Edge], universe: UniverseGraph | None = None):
        keys = frozenset(edge_key(int(u), int(v)) for u, v in edges)
        if not keys:
            raise DegenerateGraphError("a hypothesis needs at least one edge")
        if any(u == v for u, v in keys):
            raise GraphError("self-loop in hypothesis")
        if universe is not None:
            missing = [e for e in keys if e not in universe.weights]
            if missing:
                raise GraphError(f"edges not in universe: {sorted(missing)[:5]}")
        self.edges = keys
        self.vertices = frozenset(v for e in keys for v in e)
        self._adjacency: dict[int, frozenset[int]] | None = None
        if not is_connected(self):
            raise GraphError("hypothesis graph is disconnected")

    @property
    def adjacency(self) -> dict[int, frozenset[int]]:
        if self._adjacency is None:
            adj: dict[int, set[int]] = {v: set() for v in self.vertices}
            for u, v in self.edges:
                adj[u].add(v)
                adj[v].add(u)
            self._adjacency = {v: frozenset(n) for v, n in adj.items()}
        return self._adjacency

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def view(self) -> GraphView:
        return GraphView(self.vertices, self.adjacency)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Hypothesis) and self.edges == other.edges

    def __hash__(self) -> int:
        return hash(self.edges)

    def __repr__(self) -> str:
        return f"Hypothesis({self.sorted_edges()})"


# -- context vectors and distances ------------------------------------------------


class ContextVectors:
    """Sparse rows of the weighted adjacency matrix, one per vertex."""

    def __init__(self, rows: Mapping[int, Mapping[int, float]]):
        self.rows = {v: dict(r) for v, r in rows.items()}

    @property
    def dimension(self) -> int:
        return len(self.rows)

    def vector(self, x: int) -> dict[int, float]:
        return self.rows[x]

    def __contains__(self, x: int) -> bool:
        return x in self.rows


def build_context_vectors(universe: UniverseGraph) -> ContextVectors:
    return ContextVectors(universe.adjacency)


def euclidean_distance(cv: ContextVectors, x: int, y: int) -> float:
    """Euclidean distance of two context vectors; unknown ids raise KeyError."""
    a, b = cv.rows[x], cv.rows[y]
    if x == y:
        return 0.0
    total = 0.0
    for k, val in a.items():
        d = val - b.get(k, 0.0)
        total += d * d
    for k, val in b.items():
        if k not in a:
            total += val * val
    return math.sqrt(total)


class DistanceOracle:
    """Cached Euclidean distances between universe vertices.

    Pair lookups are computed lazily.  :meth:`pairwise` builds a dense
    block for a vertex subset; :meth:`full_matrix` is only permitted for
    universes with at most ``dense_cutoff`` vertices.
    """

    def __init__(self, cv: ContextVectors, dense_cutoff: int = 10_000):
        self.cv = cv
        self.dense_cutoff = dense_cutoff
        self._cache: dict[Edge, float] = {}

    def __call__(self, x: int, y: int) -> float:
        if x == y:
            if x not in self.cv.rows:
                raise KeyError(x)
            return 0.0
        key = edge_key(x, y)
        d = self._cache.get(key)
        if d is None:
            d = euclidean_distance(self.cv, x, y)
            self._cache[key] = d
        return d

    def pairwise(self, vertices: Iterable[int]) -> tuple[list[int], np.ndarray]:
        """Sorted vertex list and the square distance block over it."""
        order = sorted(vertices)
        n = len(order)
        if n > self.dense_cutoff:
            raise GraphError(f"{n} vertices exceed the dense cutoff {self.dense_cutoff}")
        if n < 2:
            return order, np.zeros((n, n))
        cols = sorted({k for v in order for k in self.cv.rows[v]})
        col_index = {c: i for i, c in enumerate(cols)}
        dense = np.zeros((n, max(len(cols), 1)))
        for i, v in enumerate(order):
            for k, w in self.cv.rows[v].items():
                dense[i, col_index[k]] = w
        return order, squareform(pdist(dense, "euclidean"))

    def full_matrix(self) -> tuple[list[int], np.ndarray]:
        return self.pairwise(self.cv.rows)


# -- connectivity --------------------------------------------------------------


def connected_components(graph) -> list[frozenset[int]]:
    """Components ordered by their smallest vertex."""
    seen: set[int] = set()
    comps = []
    for start in sorted(graph.vertices):
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u in graph.adjacency[v]:
                if u not in comp:
                    comp.add(u)
                    queue.append(u)
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def is_connected(graph) -> bool:
    if not graph.vertices:
        return False
    start = next(iter(graph.vertices))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for u in graph.adjacency[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(graph.vertices)


# -- shortest paths ---------------------------------------------------------------


@dataclass(frozen=True, order=True)
class CanonicalPath:
    vertices: tuple[int, ...]
    total_delta: float = field(compare=False)

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise GraphError("a path needs at least two vertices")
        if self.vertices[0] > self.vertices[-1]:
            object.__setattr__(self, "vertices", tuple(reversed(self.vertices)))

    @property
    def source(self) -> int:
        return self.vertices[0]

    @property
    def target(self) -> int:
        return self.vertices[-1]

    @property
    def interior(self) -> tuple[int, ...]:
        return self.vertices[1:-1]

    def edges(self) -> list[Edge]:
        return [edge_key(a, b) for a, b in zip(self.vertices, self.vertices[1:])]

    def __len__(self) -> int:
        return len(self.vertices)


def _tied(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=TIE_RTOL, abs_tol=TIE_ATOL)


class PathTable:
    """All-pairs shortest δ-paths of a graph with canonical tie-breaking.

    For every unordered connected pair ``s < t`` exactly one path is
    represented: the lexicographically smallest minimal-δ vertex sequence
    starting at ``s``.  The greedy next hop from ``c`` towards ``t`` is the
    smallest neighbour ``u`` with ``δ(c,u) + D[u,t] == D[c,t]``, which only
    depends on ``(c, t)``, so one next-hop matrix serves every pair.
    """

    def __init__(self, graph, delta):
        self.order = sorted(graph.vertices)
        self.index = {v: i for i, v in enumerate(self.order)}
        n = len(self.order)
        rows, cols, vals = [], [], []
        for u in self.order:
            for v in graph.adjacency[u]:
                if u < v:
                    rows.append(self.index[u])
                    cols.append(self.index[v])
                    vals.append(delta(u, v))
        if any(w <= 0 for w in vals):
            raise GraphError("adjacent vertices must have positive distance")
        mat = csr_matrix((vals, (rows, cols)), shape=(n, n))
        self.dist = dijkstra(mat, directed=False) if n else np.zeros((0, 0))
        self.next_hop = np.full((n, n), -1, dtype=np.int64)
        for c in self.order:
            ci = self.index[c]
            nbrs = sorted(graph.adjacency[c])
            if not nbrs:
                continue
            ni = np.array([self.index[u] for u in nbrs])
            w = np.array([delta(c, u) for u in nbrs])
            via = w[:, None] + self.dist[ni, :]
            target = self.dist[ci, :]
            ok = np.isclose(via, target[None, :], rtol=TIE_RTOL, atol=TIE_ATOL) & np.isfinite(target)[None, :]
            has = ok.any(axis=0)
            first = ok.argmax(axis=0)
            hop = np.where(has, ni[first], -1)
            hop[ci] = -1
            self.next_hop[ci, :] = hop

    @property
    def n(self) -> int:
        return len(self.order)

    def pairs(self) -> Iterator[tuple[int, int]]:
        """Connected unordered index pairs (i < j)."""
        finite = np.isfinite(self.dist)
        for i in range(self.n):
            for j in np.nonzero(finite[i, i + 1 :])[0]:
                yield i, i + 1 + int(j)

    def path_count(self) -> int:
        finite = np.isfinite(self.dist)
        return int((finite.sum() - self.n) // 2)

    def path_indices(self, i: int, j: int) -> list[int]:
        seq = [i]
        c = i
        while c != j:
            c = int(self.next_hop[c, j])
            if c < 0:
                raise GraphError("no path between requested vertices")
            seq.append(c)
        return seq

    def path(self, s: int, t: int) -> CanonicalPath:
        i, j = sorted((self.index[s], self.index[t]))
        seq = self.path_indices(i, j)
        return CanonicalPath(tuple(self.order[k] for k in seq), float(self.dist[i, j]))

    def paths(self) -> list[CanonicalPath]:
        return [
            CanonicalPath(tuple(self.order[k] for k in self.path_indices(i, j)), float(self.dist[i, j]))
            for i, j in self.pairs()
        ]

    def membership_counts(self) -> np.ndarray:
        """Number of canonical paths containing each vertex (endpoints included)."""
        n = self.n
        counts = np.zeros(n, dtype=np.int64)
        for t in range(n):
            col = self.dist[:, t]
            reach = [c for c in range(t) if np.isfinite(col[c])] + [
                c for c in range(t + 1, n) if np.isfinite(col[c])
            ]
            sources = [c for c in reach if c < t]
            if not sources:
                continue
            sub = np.zeros(n, dtype=np.int64)
            sub[sources] = 1
            # children sit strictly farther from t than their next hop
            for c in sorted(reach, key=lambda c: -col[c]):
                parent = self.next_hop[c, t]
                if parent != t:
                    sub[parent] += sub[c]
            counts += sub
            counts[t] += len(sources)
        return counts


def shortest_paths(graph, delta) -> list[CanonicalPath]:
    """One canonical shortest δ-path per connected unordered vertex pair."""
    return PathTable(graph, delta).paths()


def paths_between(graph, delta, sources: Iterable[int], targets: Iterable[int]) -> list[CanonicalPath]:
    """Canonical shortest paths for every connected (source, target) pair.

    Same tie-breaking as :class:`PathTable`, but Dijkstra only runs from
    the endpoint vertices, so large graphs stay cheap.
    """
    sources = sorted(set(sources) & graph.vertices)
    targets = sorted(set(targets) & graph.vertices)
    ends = sorted(set(sources) | set(targets))
    if not sources or not targets:
        return []
    order = sorted(graph.vertices)
    index = {v: i for i, v in enumerate(order)}
    rows, cols, vals = [], [], []
    for u in order:
        for v in graph.adjacency[u]:
            if u < v:
                rows.append(index[u])
                cols.append(index[v])
                vals.append(delta(u, v))
    n = len(order)
    mat = csr_matrix((vals, (rows, cols)), shape=(n, n))
    dist = dijkstra(mat, directed=False, indices=[index[e] for e in ends])
    to = {e: dist[k] for k, e in enumerate(ends)}
    found: dict[tuple[int, int], CanonicalPath] = {}
    for s in sources:
        for t in targets:
            a, b = (s, t) if s < t else (t, s)
            if a == b or (a, b) in found or not np.isfinite(to[b][index[a]]):
                continue
            db = to[b]
            seq = [a]
            c = a
            while c != b:
                c = min(
                    u for u in graph.adjacency[c]
                    if math.isclose(delta(c, u) + db[index[u]], db[index[c]], rel_tol=TIE_RTOL, abs_tol=TIE_ATOL)
                )
                seq.append(c)
            found[(a, b)] = CanonicalPath(tuple(seq), float(db[index[a]]))
    return [found[k] for k in sorted(found)]


def betweenness_all(graph, delta, table: PathTable | None = None) -> dict[int, float]:
    table = table or PathTable(graph, delta)
    total = table.path_count()
    if total == 0:
        raise DegenerateGraphError("graph has no shortest paths")
    counts = table.membership_counts()
    return {v: float(counts[i] / total) for i, v in enumerate(table.order)}


def betweenness(v: int, graph, delta) -> float:
    """Fraction of canonical shortest paths that contain ``v``."""
    if v not in graph.vertices:
        raise KeyError(v)
    return betweenness_all(graph, delta)[v]


# -- descriptive statistics ------------------------------------------------------------


@dataclass
class GraphStats:
    vertex_count: int
    edge_count: int
    density: float
    component_count: int
    component_max: int
    component_avg: float
    component_median: float
    radius: float | None
    diameter: float | None
    transitivity: float | None
    asp_hops: float | None
    asp_delta: float | None
    degree_histogram: dict[int, int]

    @classmethod
    def empty(cls) -> "GraphStats":
        return cls(0, 0, 0.0, 0, 0, 0.0, 0.0, None, None, None, None, None, {})

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "degree_histogram"}
        d["degree_histogram"] = {str(k): v for k, v in sorted(self.degree_histogram.items())}
        return d

    def to_tsv(self) -> str:
        rows = []
        for k, v in self.as_dict().items():
            if k == "degree_histogram":
                continue
            rows.append(f"{k}\t{'' if v is None else (fmt_float(v) if isinstance(v, float) else v)}\n")
        return "".join(rows)


def _weighted_mean(values: list[float], weights: list[int]) -> float:
    return sum(v * w for v, w in zip(values, weights)) / sum(weights)


def graph_stats(graph, delta=None) -> GraphStats:
    """Table-style descriptive statistics.

    Radius, diameter and the two average shortest path lengths are computed
    per component (hop distance for the first three) and averaged with the
    component vertex count as weight.  Singleton components contribute 0.
    ``asp_delta`` is ``None`` when no distance oracle is supplied.
    """
    vertices = graph.vertices
    if not vertices:
        return GraphStats.empty()
    edges = {edge_key(u, v) for u in vertices for v in graph.adjacency[u]}
    nv, ne = len(vertices), len(edges)
    density = 2 * ne / (nv * (nv - 1)) if nv >= 2 else 0.0
    comps = connected_components(graph)
    sizes = [len(c) for c in comps]

    radii, diams, asps, asps_d = [], [], [], []
    for comp in comps:
        if len(comp) == 1:
            radii.append(0.0)
            diams.append(0.0)
            asps.append(0.0)
            asps_d.append(0.0)
            continue
        order = sorted(comp)
        idx = {v: i for i, v in enumerate(order)}
        rows = [idx[u] for u in order for v in graph.adjacency[u] if u < v]
        cols = [idx[v] for u in order for v in graph.adjacency[u] if u < v]
        m = len(order)
        hop = dijkstra(csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m)), directed=False, unweighted=True)
        ecc = hop.max(axis=1)
        radii.append(float(ecc.min()))
        diams.append(float(ecc.max()))
        npairs = m * (m - 1)
        asps.append(float(hop.sum() / npairs))
        if delta is not None:
            table = PathTable(GraphView(comp, {v: graph.adjacency[v] for v in comp}), delta)
            asps_d.append(float(table.dist.sum() / npairs))

    triangles = 0
    triads = 0
    for v in vertices:
        nbrs = graph.adjacency[v]
        d = len(nbrs)
        triads += d * (d - 1) // 2
        triangles += sum(1 for a in nbrs for b in nbrs if a < b and b in graph.adjacency[a])
    transitivity = triangles / triads if triads else 0.0

    hist = Counter(len(graph.adjacency[v]) for v in vertices)
    return GraphStats(
        vertex_count=nv,
        edge_count=ne,
        density=density,
        component_count=len(comps),
        component_max=max(sizes),
        component_avg=sum(sizes) / len(sizes),
        component_median=float(statistics.median(sizes)),
        radius=_weighted_mean(radii, sizes),
        diameter=_weighted_mean(diams, sizes),
        transitivity=transitivity,
        asp_hops=_weighted_mean(asps, sizes),
        asp_delta=_weighted_mean(asps_d, sizes) if delta is not None else None,
        degree_histogram=dict(sorted(hist.items())),
    )
