"""Vertex clusterings feeding the cluster association entropy."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.sparse import csr_matrix
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from ._io import atomic_write_text
from .graph import ContextVectors


class ClusterLabeling:
    """Vertex -> set of cluster labels (possibly empty)."""

    def __init__(self, memberships: Mapping[int, Iterable[str]]):
        self.memberships = {int(v): frozenset(ls) for v, ls in memberships.items()}

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(l for ls in self.memberships.values() for l in ls)

    def __getitem__(self, v: int) -> frozenset[str]:
        return self.memberships.get(v, frozenset())

    def clusters(self) -> dict[str, frozenset[int]]:
        out: dict[str, set[int]] = {}
        for v, ls in self.memberships.items():
            for l in ls:
                out.setdefault(l, set()).add(v)
        return {l: frozenset(vs) for l, vs in sorted(out.items())}

    def to_tsv(self) -> str:
        return "".join(f"{v}\t{l}\n" for v in sorted(self.memberships) for l in sorted(self.memberships[v]))

    def write(self, path: str | Path) -> None:
        atomic_write_text(path, self.to_tsv())

    @classmethod
    def read(cls, path: str | Path, vertices: Iterable[int] = ()) -> "ClusterLabeling":
        memberships: dict[int, set[str]] = {int(v): set() for v in vertices}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    vid, label = line.split("\t", 1)
                    memberships.setdefault(int(vid), set()).add(label)
        return cls(memberships)


def maximal_cliques(adjacency: Mapping[int, set[int]]) -> list[frozenset[int]]:
    """Bron-Kerbosch with Tomita pivoting."""
    found: list[frozenset[int]] = []

    def expand(r: set[int], p: set[int], x: set[int]) -> None:
        if not p and not x:
            found.append(frozenset(r))
            return
        pivot = max(p | x, key=lambda u: (len(adjacency[u] & p), -u))
        for v in sorted(p - adjacency[pivot]):
            expand(r | {v}, p & adjacency[v], x & adjacency[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(adjacency), set())
    return found


def threshold_clique_clusters(delta, vertices: Iterable[int], tau: float) -> ClusterLabeling:
    """Maximal cliques of the graph linking pairs with ``δ < tau``.

    Labels are ``"0"``, ``"1"``, ... in order of the sorted member tuples,
    i.e. by smallest member first.
    """
    order = sorted(vertices)
    adj: dict[int, set[int]] = {v: set() for v in order}
    for i, a in enumerate(order):
        for b in order[i + 1 :]:
            if delta(a, b) < tau:
                adj[a].add(b)
                adj[b].add(a)
    cliques = sorted(tuple(sorted(c)) for c in maximal_cliques(adj))
    memberships: dict[int, set[str]] = {v: set() for v in order}
    for label, members in enumerate(cliques):
        for v in members:
            memberships[v].add(str(label))
    return ClusterLabeling(memberships)


@dataclass(frozen=True)
class KMeansConfig:
    bucket_size: int = 2000
    k_per_bucket: int = 40
    seeds_per_bucket: int = 50
    rng_seed: int = 0
    max_iter: int = 100
    tol: float = 1e-6
    # random-point restarts per bucket; the lowest-inertia run is kept
    n_init: int = 10

    def __post_init__(self):
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")
        if self.k_per_bucket < 1:
            raise ValueError("k_per_bucket must be >= 1")
        if self.seeds_per_bucket >= self.bucket_size:
            raise ValueError("seeds_per_bucket must be smaller than bucket_size")


def _as_matrix(cv: ContextVectors) -> tuple[list[int], csr_matrix]:
    order = sorted(cv.rows)
    index = {v: i for i, v in enumerate(order)}
    rows, cols, vals = [], [], []
    for i, v in enumerate(order):
        for k, w in sorted(cv.rows[v].items()):
            rows.append(i)
            cols.append(index[k])
            vals.append(w)
    n = len(order)
    return order, csr_matrix((vals, (rows, cols)), shape=(n, n))


def make_buckets(X: csr_matrix, cfg: KMeansConfig, rng: np.random.Generator) -> list[np.ndarray]:
    """Partition row indices by incremental random seeding.

    Each round draws ``seeds_per_bucket`` unassigned rows, takes their
    centroid, and fills the bucket with the seeds plus the nearest
    unassigned rows up to ``bucket_size``.
    """
    unassigned = np.arange(X.shape[0])
    sq_norms = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    buckets = []
    while unassigned.size:
        if unassigned.size <= cfg.seeds_per_bucket or unassigned.size <= cfg.bucket_size:
            buckets.append(np.sort(unassigned))
            break
        seeds = np.sort(rng.choice(unassigned, size=cfg.seeds_per_bucket, replace=False))
        rest = np.setdiff1d(unassigned, seeds, assume_unique=True)
        centroid = np.asarray(X[seeds].mean(axis=0)).ravel()
        d2 = sq_norms[rest] - 2.0 * (X[rest] @ centroid) + centroid @ centroid
        take = rest[np.argsort(d2, kind="stable")[: cfg.bucket_size - cfg.seeds_per_bucket]]
        bucket = np.sort(np.concatenate([seeds, take]))
        buckets.append(bucket)
        unassigned = np.setdiff1d(unassigned, bucket, assume_unique=True)
    return buckets


def bucketed_kmeans(cv: ContextVectors, cfg: KMeansConfig = KMeansConfig()) -> ClusterLabeling:
    """K-means inside memory-sized buckets; labels read ``bucket:cluster``."""
    if cv.dimension == 0:
        raise ValueError("no context vectors to cluster")
    order, X = _as_matrix(cv)
    rng = np.random.default_rng(cfg.rng_seed)
    memberships: dict[int, set[str]] = {}
    for b, bucket in enumerate(make_buckets(X, cfg, rng)):
        k = min(cfg.k_per_bucket, bucket.size)
        sub = X[bucket]
        if k == 1:
            assignment = np.zeros(bucket.size, dtype=int)
        else:
            km = KMeans(
                n_clusters=k,
                init="random",
                n_init=cfg.n_init,
                max_iter=cfg.max_iter,
                tol=cfg.tol,
                random_state=int(rng.integers(2**31 - 1)),
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                assignment = km.fit_predict(sub)
        for row, c in zip(bucket, assignment):
            memberships[order[row]] = {f"{b}:{int(c)}"}
    return ClusterLabeling(memberships)
