import itertools
import math

import numpy as np
import pytest

from kgvirtue.cluster import threshold_clique_clusters
from kgvirtue.graph import DistanceOracle, Hypothesis, UniverseGraph, build_context_vectors

# PASS/FAIL lines collected by the acceptance tests
ACCEPTANCE_RESULTS = pytest.StashKey[list]()

TOY_EDGES = {(1, 2): 0.5, (1, 3): 1.0, (2, 3): 1.0, (2, 4): 0.5, (2, 6): 1.0, (4, 5): 0.5, (4, 6): 0.5}

# distance matrix of the toy universe, as printed to four decimals
TOY_DISTANCES = {
    (1, 2): 1.3229, (1, 3): 1.5, (1, 4): 1.2247, (1, 5): 1.2247, (1, 6): 1.2247,
    (2, 3): 1.8708, (2, 4): 1.5, (2, 5): 1.5, (2, 6): 1.8028,
    (3, 4): 1.3229, (3, 5): 1.5, (3, 6): 1.118,
    (4, 5): 1.0, (4, 6): 1.0,
    (5, 6): 1.0,
}

TOY_CLUSTERS = {"A": {1, 2}, "B": {1, 4, 5, 6}, "C": {3, 4, 6}}


@pytest.fixture
def toy():
    return UniverseGraph(TOY_EDGES)


@pytest.fixture
def delta(toy):
    return DistanceOracle(build_context_vectors(toy))


@pytest.fixture
def hyp_e(toy):
    return Hypothesis([(5, 4), (4, 6)], toy)


@pytest.fixture
def hyp_f(toy):
    return Hypothesis([(2, 1), (2, 3), (1, 3)], toy)


@pytest.fixture
def hyp_g(toy):
    return Hypothesis([(2, 4), (2, 6), (4, 5), (4, 6)], toy)


@pytest.fixture
def labeling(toy, delta):
    return threshold_clique_clusters(delta, toy.vertices, 1.5)


def random_connected_graph(rng, n_max=6, tie_weights=False):
    """Random connected graph with 2..n_max vertices and a symmetric δ."""
    n = int(rng.integers(2, n_max + 1))
    verts = list(range(n))
    order = list(rng.permutation(n))
    edges = set()
    for i in range(1, n):
        j = order[int(rng.integers(i))]
        edges.add(tuple(sorted((int(order[i]), int(j)))))
    for a, b in itertools.combinations(verts, 2):
        if rng.random() < 0.4:
            edges.add((a, b))
    if tie_weights:
        w = {e: float(rng.integers(1, 3)) for e in edges}
    else:
        w = {e: float(rng.uniform(0.1, 2.0)) for e in edges}

    def d(u, v):
        return w[(min(u, v), max(u, v))]

    return Hypothesis(edges), d, w


def brute_force_paths(h, d):
    """Every simple path, by exhaustive DFS."""
    adj = h.adjacency
    out = {}
    for s in sorted(h.vertices):
        stack = [(s, (s,), 0.0)]
        while stack:
            c, seq, tot = stack.pop()
            if len(seq) > 1:
                out.setdefault((seq[0], seq[-1]), []).append((seq, tot))
            for u in adj[c]:
                if u not in seq:
                    stack.append((u, seq + (u,), tot + d(c, u)))
    return out


def brute_force_canonical(h, d):
    """Lexicographically smallest minimal-δ path for each pair s < t."""
    res = {}
    for (s, t), cands in brute_force_paths(h, d).items():
        if s > t:
            continue
        best = min(tot for _, tot in cands)
        tied = [seq for seq, tot in cands if math.isclose(tot, best, rel_tol=1e-9, abs_tol=1e-12)]
        res[(s, t)] = (min(tied), best)
    return res


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic500():
    """500-vertex NPMI universe with a K-means labelling."""
    from kgvirtue.cluster import KMeansConfig, bucketed_kmeans
    from kgvirtue.ingest import TermLexicon, build_universe, npmi_scores
    from kgvirtue.synthetic import topic_corpus

    statements = topic_corpus(500, 3000, n_topics=20, seed=1)
    lex = TermLexicon({t for s in statements for t in (s.term_a, s.term_b)})
    universe = build_universe(npmi_scores(statements), lex)
    cv = build_context_vectors(universe)
    labeling = bucketed_kmeans(cv, KMeansConfig(bucket_size=200, k_per_bucket=20, seeds_per_bucket=10, rng_seed=3))
    return universe, labeling, DistanceOracle(cv)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_RESULTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
