"""Genetic refinement of a universe into high-virtue subgraphs.

Individuals are :class:`~kgvirtue.graph.Hypothesis` objects.  All random
draws come from one seeded :class:`numpy.random.Generator` in a fixed
order, so a run is reproducible regardless of how many worker processes
score the population.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._io import atomic_replace_dir, atomic_write_text, file_digest, fmt_float
from .cluster import ClusterLabeling
from .graph import DistanceOracle, GraphError, Hypothesis, UniverseGraph, edge_key
from .ranking import FULL_PAIRWISE, MODES, build_ranking_multigraph, combined_rank
from .virtues import VirtueVector, score

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaConfig:
    p_m: float = 0.05
    p_c: float = 0.75
    k_m: int = 5
    n_generations: int = 50
    rho_p: float = 0.05
    mu_i: float = 100.0
    sigma_i: float = 80.0
    k_refut: int = 1
    rng_seed: int = 0
    multigraph_mode: str = FULL_PAIRWISE
    population_size: int = 100
    # early stop on the mean combined score; window 0 disables it
    early_stop_window: int = 0
    early_stop_eps: float = 1e-3

    def __post_init__(self):
        for name in ("p_m", "p_c"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if self.n_generations < 1:
            raise ValueError("n_generations must be >= 1")
        if self.mu_i <= 0:
            raise ValueError("mu_i must be positive")
        if self.sigma_i < 0 or self.rho_p < 0:
            raise ValueError("standard deviations must be non-negative")
        if self.k_m < 0 or self.k_refut < 1 or self.population_size < 1:
            raise ValueError("k_m >= 0, k_refut >= 1 and population_size >= 1 required")
        if self.multigraph_mode not in MODES:
            raise ValueError(f"unknown multigraph mode {self.multigraph_mode!r}")


def gauss_int(rng: np.random.Generator, mu: float, sigma: float, floor_at: int = 1) -> int:
    """Normal draw truncated to an integer and clamped from below."""
    return max(floor_at, math.floor(rng.normal(mu, sigma)))


# -- operators -------------------------------------------------------------------


def sample_star(universe: UniverseGraph, size_target: int, rng: np.random.Generator) -> Hypothesis:
    """Random hub plus up to ``size_target - 1`` of its neighbours."""
    if size_target < 2:
        raise ValueError("size_target must be >= 2")
    hubs = sorted(v for v in universe.vertices if universe.adjacency[v])
    if not hubs:
        raise GraphError("universe has no edges")
    hub = hubs[int(rng.integers(len(hubs)))]
    nbrs = universe.neighbors(hub)
    take = min(size_target - 1, len(nbrs))
    picked = rng.choice(len(nbrs), size=take, replace=False)
    return Hypothesis([(hub, nbrs[i]) for i in sorted(picked)], universe)


def init_population(universe: UniverseGraph, cfg: GaConfig, rng: np.random.Generator) -> list[Hypothesis]:
    return [
        sample_star(universe, gauss_int(rng, cfg.mu_i, cfg.sigma_i, floor_at=2), rng)
        for _ in range(cfg.population_size)
    ]


def mutate(h: Hypothesis, universe: UniverseGraph, rng: np.random.Generator) -> Hypothesis | None:
    """Add a frontier edge or delete an edge, each with probability 1/2.

    Returns ``None`` when the branch has no legal move or the offspring is
    disconnected.
    """
    if rng.random() < 0.5:
        candidates = sorted(
            {edge_key(v, u) for v in h.vertices for u in universe.adjacency[v]} - h.edges
        )
        if not candidates:
            return None
        pick = candidates[int(rng.integers(len(candidates)))]
        return Hypothesis(h.edges | {pick})
    edges = h.sorted_edges()
    drop = edges[int(rng.integers(len(edges)))]
    rest = h.edges - {drop}
    if not rest:
        return None
    try:
        return Hypothesis(rest)
    except GraphError:
        return None


def crossover(h1: Hypothesis, h2: Hypothesis, rng: np.random.Generator) -> Hypothesis | None:
    """Child from a random half of each parent's edges, if connected."""
    chosen = set()
    for parent in (h1, h2):
        edges = parent.sorted_edges()
        take = math.ceil(len(edges) / 2)
        chosen.update(edges[i] for i in rng.choice(len(edges), size=take, replace=False))
    try:
        return Hypothesis(chosen)
    except GraphError:
        return None


# -- scoring ---------------------------------------------------------------------

_WORKER_CTX: tuple | None = None


def _init_worker(ctx: tuple) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _score_edges(edges: tuple) -> VirtueVector:
    universe, labeling, delta, k = _WORKER_CTX
    return score(Hypothesis(edges), universe, labeling, delta, k, empty_remainder_ok=True)


class Scorer:
    """Scores hypotheses against a fixed universe, memoised by edge set."""

    def __init__(self, universe: UniverseGraph, labeling: ClusterLabeling, delta: DistanceOracle, k: int = 1, workers: int = 1):
        self.universe = universe
        self.labeling = labeling
        self.delta = delta
        self.k = k
        self.workers = max(1, int(workers))
        self.cache: dict[frozenset, VirtueVector] = {}
        self._pool: ProcessPoolExecutor | None = None

    def __enter__(self) -> "Scorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __call__(self, hyps: Sequence[Hypothesis]) -> list[VirtueVector]:
        todo = []
        seen = set()
        for h in hyps:
            if h.edges not in self.cache and h.edges not in seen:
                seen.add(h.edges)
                todo.append(h)
        if todo:
            if self.workers == 1 or len(todo) == 1:
                results = [score(h, self.universe, self.labeling, self.delta, self.k, empty_remainder_ok=True) for h in todo]
            else:
                if self._pool is None:
                    self._pool = ProcessPoolExecutor(
                        self.workers, initializer=_init_worker, initargs=((self.universe, self.labeling, self.delta, self.k),)
                    )
                chunk = max(1, len(todo) // (4 * self.workers))
                results = list(self._pool.map(_score_edges, [tuple(h.sorted_edges()) for h in todo], chunksize=chunk))
            for h, vec in zip(todo, results):
                self.cache[h.edges] = vec
        return [self.cache[h.edges] for h in hyps]


# -- generations -----------------------------------------------------------------


@dataclass
class Member:
    hypothesis: Hypothesis
    virtues: VirtueVector
    score: float


@dataclass
class GenerationSnapshot:
    generation: int
    members: list[Member]
    rng_state: dict = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def population(self) -> list[Hypothesis]:
        return [m.hypothesis for m in self.members]

    @property
    def rng_digest(self) -> str:
        return hashlib.sha256(json.dumps(self.rng_state, sort_keys=True).encode()).hexdigest()[:16]

    def mean_score(self) -> float:
        return math.fsum(m.score for m in self.members) / len(self.members)


def rank_members(hyps: Sequence[Hypothesis], vectors: Sequence[VirtueVector], mode: str) -> list[Member]:
    """Order by the combined ranking; ties keep input order."""
    graph = build_ranking_multigraph(list(enumerate(vectors)), mode)
    return [Member(hyps[i], vectors[i], s) for i, s in combined_rank(graph)]


def step_generation(
    population: Sequence[Hypothesis],
    universe: UniverseGraph,
    cfg: GaConfig,
    rng: np.random.Generator,
    scorer: Scorer,
    generation: int,
) -> GenerationSnapshot:
    """Mutate, mate, score the expanded pool and trim it to a random size."""
    if not population:
        raise ValueError("empty population")
    prev = len(population)
    pool = list(population)
    for h in population:
        if rng.random() < cfg.p_m:
            child = mutate(h, universe, rng)
            if child is not None:
                pool.append(child)
    if prev > 1:
        for i, h in enumerate(population):
            for _ in range(cfg.k_m):
                if rng.random() < cfg.p_c:
                    j = int(rng.integers(prev - 1))
                    j += j >= i
                    child = crossover(h, population[j], rng)
                    if child is not None:
                        pool.append(child)
    ranked = rank_members(pool, scorer(pool), cfg.multigraph_mode)
    target = min(len(pool), gauss_int(rng, prev, cfg.rho_p * prev, floor_at=1))
    survivors = [m.hypothesis for m in ranked[:target]]
    members = rank_members(survivors, scorer(survivors), cfg.multigraph_mode)
    return GenerationSnapshot(generation, members, rng.bit_generator.state)


# -- persistence -----------------------------------------------------------------


INITIAL_DIR = "initial"


def _gen_dir(root: Path, generation: int) -> Path:
    return root / f"gen_{generation:04d}"


def snapshot_files(snapshot: GenerationSnapshot, universe: UniverseGraph) -> dict[str, str]:
    pop_lines = []
    for i, m in enumerate(snapshot.members):
        for u, v in m.hypothesis.sorted_edges():
            pop_lines.append(f"{i}\t{u}\t{v}\t{fmt_float(universe.weight(u, v))}\n")
    scores = {
        "generation": snapshot.generation,
        "size": snapshot.size,
        "rng_digest": snapshot.rng_digest,
        "members": [
            {"member": i, "rank": i + 1, "score": m.score, "virtues": m.virtues.as_dict()}
            for i, m in enumerate(snapshot.members)
        ],
    }
    return {
        "population.tsv": "".join(pop_lines),
        "scores.json": json.dumps(scores, indent=1, sort_keys=True) + "\n",
        "state.json": json.dumps(snapshot.rng_state, sort_keys=True) + "\n",
    }


def write_snapshot(snapshot: GenerationSnapshot, universe: UniverseGraph, root: Path, name: str | None = None) -> Path:
    target = root / name if name else _gen_dir(root, snapshot.generation)
    staging = root / f".{target.name}.partial"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    for name, text in snapshot_files(snapshot, universe).items():
        (staging / name).write_text(text, encoding="utf-8")
    atomic_replace_dir(staging, target)
    return target


def read_snapshot(path: Path) -> GenerationSnapshot:
    edges: dict[int, list] = {}
    with open(path / "population.tsv", encoding="utf-8") as fh:
        for line in fh:
            i, u, v, _w = line.rstrip("\n").split("\t")
            edges.setdefault(int(i), []).append((int(u), int(v)))
    meta = json.loads((path / "scores.json").read_text(encoding="utf-8"))
    state = json.loads((path / "state.json").read_text(encoding="utf-8"))
    members = [
        Member(Hypothesis(edges[rec["member"]]), VirtueVector.from_dict(rec["virtues"]), float(rec["score"]))
        for rec in meta["members"]
    ]
    return GenerationSnapshot(int(meta["generation"]), members, state)


def list_generations(root: Path) -> list[int]:
    if not root.exists():
        return []
    return sorted(int(p.name[4:]) for p in root.glob("gen_[0-9][0-9][0-9][0-9]") if p.is_dir())


def load_snapshots(root: Path, include_initial: bool = False) -> list[GenerationSnapshot]:
    snaps = [read_snapshot(_gen_dir(root, g)) for g in list_generations(root)]
    if include_initial and (root / INITIAL_DIR).is_dir():
        snaps.insert(0, read_snapshot(root / INITIAL_DIR))
    return snaps


def write_manifest(root: Path, cfg: GaConfig, generations: Sequence[int]) -> None:
    digests = {}
    for g in generations:
        d = _gen_dir(root, g)
        digests[d.name] = {name: file_digest(d / name) for name in ("population.tsv", "scores.json", "state.json")}
    manifest = {"config": asdict(cfg), "seed": cfg.rng_seed, "generations": digests}
    atomic_write_text(root / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _stable(snapshots: Sequence[GenerationSnapshot], window: int, eps: float) -> bool:
    if window <= 0 or len(snapshots) < window:
        return False
    means = [s.mean_score() for s in snapshots[-window:]]
    return max(means) - min(means) <= eps


def run(
    universe: UniverseGraph,
    labeling: ClusterLabeling,
    delta: DistanceOracle,
    cfg: GaConfig,
    workers: int = 1,
    out_dir: Path | None = None,
    resume: bool = False,
) -> list[GenerationSnapshot]:
    """Run ``cfg.n_generations`` generations and return their snapshots.

    With ``out_dir`` every snapshot is persisted as it is produced;
    ``resume`` continues from the latest persisted generation using its
    stored generator state.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    out_dir = Path(out_dir) if out_dir is not None else None
    snapshots: list[GenerationSnapshot] = []
    if resume and out_dir is not None and list_generations(out_dir):
        snapshots = load_snapshots(out_dir)
        rng.bit_generator.state = snapshots[-1].rng_state
        population = snapshots[-1].population
        log.info("resuming after generation %d", snapshots[-1].generation)
    else:
        if out_dir is not None and out_dir.exists():
            for old in list_generations(out_dir):
                shutil.rmtree(_gen_dir(out_dir, old))
        population = init_population(universe, cfg, rng)
    with Scorer(universe, labeling, delta, cfg.k_refut, workers) as scorer:
        if out_dir is not None and not snapshots:
            # generation 0 is kept outside the gen_ directories; scoring it draws no randomness
            initial = GenerationSnapshot(0, rank_members(population, scorer(population), cfg.multigraph_mode), rng.bit_generator.state)
            write_snapshot(initial, universe, out_dir, name=INITIAL_DIR)
        start = snapshots[-1].generation + 1 if snapshots else 1
        for g in range(start, cfg.n_generations + 1):
            if _stable(snapshots, cfg.early_stop_window, cfg.early_stop_eps):
                log.info("population stable; stopping before generation %d", g)
                break
            snap = step_generation(population, universe, cfg, rng, scorer, g)
            snapshots.append(snap)
            population = snap.population
            log.info("generation %d: %d individuals, mean score %.4f", g, snap.size, snap.mean_score())
            if out_dir is not None:
                write_snapshot(snap, universe, out_dir)
                write_manifest(out_dir, cfg, [s.generation for s in snapshots])
    return snapshots
