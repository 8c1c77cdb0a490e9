"""Literature-based-discovery evaluation of refined generations.

Solutions are canonical shortest paths between source and target vertices
in the union graph of a generation, ranked by their virtues with that
union graph as the universe.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ._io import fmt_float
from .cluster import ClusterLabeling
from .evolve import GenerationSnapshot
from .graph import CanonicalPath, Hypothesis, UniverseGraph, paths_between
from .ingest import FulltextIndex, Pruning, TermLexicon, lookup_term, normalize_term
from .ranking import FULL_PAIRWISE, build_ranking_multigraph, combined_rank
from .virtues import MEASURES, VirtueVector, score

KEY_SEPARATOR = "\x1f"


class EvaluationError(ValueError):
    pass


class MissingOracleKeysError(EvaluationError):
    def __init__(self, keys: Sequence[str]):
        self.keys = sorted(keys)
        shown = ", ".join(k.replace(KEY_SEPARATOR, " AND ") for k in self.keys[:5])
        super().__init__(f"{len(self.keys)} conjunctions missing from the frequency oracle: {shown}")


@dataclass
class DiscoveryTask:
    source: list[str]
    target: list[str]
    intermediates: dict[str, list[str]]
    name: str = "task"
    pruning: str | None = None

    def __post_init__(self):
        if not self.source or not self.target:
            raise EvaluationError("source and target terms must be nonempty")
        if {normalize_term(t) for t in self.source} & {normalize_term(t) for t in self.target}:
            raise EvaluationError("source and target terms overlap")

    @classmethod
    def from_dict(cls, d: dict) -> "DiscoveryTask":
        inter = d.get("intermediates", {})
        if isinstance(inter, list):
            inter = {(forms[0] if isinstance(forms, list) else forms): (forms if isinstance(forms, list) else [forms]) for forms in inter}
        return cls(
            source=list(d["source"]),
            target=list(d["target"]),
            intermediates={k: list(v) for k, v in inter.items()},
            name=d.get("name", "task"),
            pruning=d.get("pruning"),
        )

    @classmethod
    def read(cls, path: str | Path) -> "DiscoveryTask":
        path = Path(path)
        task = cls.from_dict(json.loads(path.read_text(encoding="utf-8")))
        if task.pruning and not Path(task.pruning).is_absolute():
            task.pruning = str(path.parent / task.pruning)
        return task


@dataclass
class ResolvedTask:
    source: frozenset[int]
    target: frozenset[int]
    intermediates: dict[str, frozenset[int]]

    @property
    def any_intermediate(self) -> frozenset[int]:
        return frozenset().union(*self.intermediates.values()) if self.intermediates else frozenset()


def _resolve_forms(index: FulltextIndex, forms: Iterable[str], pruning: Pruning | None) -> frozenset[int]:
    ids: set[int] = set()
    for form in forms:
        ids |= lookup_term(index, form, pruning)
    return frozenset(ids)


def resolve_task(task: DiscoveryTask, index: FulltextIndex, pruning: Pruning | None = None) -> ResolvedTask:
    """Map surface forms to vertex ids; unresolvable source/target raise."""
    if pruning is None and task.pruning:
        pruning = Pruning.read(task.pruning, index.lexicon)
    source = _resolve_forms(index, task.source, pruning)
    target = _resolve_forms(index, task.target, pruning)
    if not source:
        raise EvaluationError(f"source terms {task.source} match no vertex")
    if not target:
        raise EvaluationError(f"target terms {task.target} match no vertex")
    return ResolvedTask(
        source - target,
        target - source,
        {name: _resolve_forms(index, forms, pruning) for name, forms in task.intermediates.items()},
    )


def union_graph(snapshot: GenerationSnapshot, universe: UniverseGraph) -> UniverseGraph:
    if not snapshot.members:
        raise EvaluationError("empty snapshot")
    edges = set()
    for h in snapshot.population:
        edges |= h.edges
    return universe.subgraph(edges)


@dataclass
class SolutionGraph:
    path: CanonicalPath
    rank: int
    virtues: VirtueVector
    score: float

    @property
    def interior(self) -> tuple[int, ...]:
        return self.path.interior


def solutions(
    union: UniverseGraph,
    task: ResolvedTask,
    delta,
    labeling: ClusterLabeling,
    k: int = 1,
    mode: str = FULL_PAIRWISE,
) -> list[SolutionGraph]:
    """Ranked shortest source-target paths of the union graph."""
    paths = paths_between(union, delta, task.source, task.target)
    if not paths:
        return []
    paths.sort(key=lambda p: (len(p), p.vertices))
    vectors = [score(Hypothesis(p.edges()), union, labeling, delta, k, empty_remainder_ok=True) for p in paths]
    ranked = combined_rank(build_ranking_multigraph(list(enumerate(vectors)), mode))
    return [SolutionGraph(paths[i], r, vectors[i], s) for r, (i, s) in enumerate(ranked, 1)]


def _hits(sols: Sequence[SolutionGraph], intermediate: Iterable[int]) -> list[SolutionGraph]:
    ids = set(intermediate)
    return [s for s in sols if ids.intersection(s.interior)]


def evd(sols: Sequence[SolutionGraph], intermediate: Iterable[int]) -> int | None:
    """Best rank of a solution passing through the intermediate."""
    hits = _hits(sols, intermediate)
    return min(s.rank for s in hits) if hits else None


def evd_r(sols: Sequence[SolutionGraph], intermediate: Iterable[int]) -> float | None:
    """Mean relative inverse rank over intermediate-containing solutions."""
    hits = _hits(sols, intermediate)
    if not hits:
        return None
    n = len(sols)
    return math.fsum((n - s.rank + 1) / n for s in hits) / len(hits)


# -- claim frequency ----------------------------------------------------------------


def conjunction_key(terms: Iterable[str]) -> str:
    return KEY_SEPARATOR.join(sorted({normalize_term(t) for t in terms}))


class FrequencyOracle:
    """Offline literature-frequency lookup keyed by term conjunctions."""

    def __init__(self, counts: dict[str, int] | None = None):
        self.counts: dict[str, int] = {}
        for key, c in (counts or {}).items():
            self.set(key.split(KEY_SEPARATOR), c)

    def set(self, terms: Iterable[str], count: int) -> None:
        if count < 0:
            raise EvaluationError("frequency counts must be non-negative")
        self.counts[conjunction_key(terms)] = int(count)

    def get(self, terms: Iterable[str]) -> int | None:
        return self.counts.get(conjunction_key(terms))

    @classmethod
    def read(cls, path: str | Path) -> "FrequencyOracle":
        oracle = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                key, _, count = line.rpartition("\t")
                if not key:
                    raise EvaluationError(f"{path}:{lineno}: expected key<TAB>count")
                oracle.set(key.split(KEY_SEPARATOR), int(count))
        return oracle

    def to_tsv(self) -> str:
        return "".join(f"{k}\t{c}\n" for k, c in sorted(self.counts.items()))


def claim_paths(sols: Sequence[SolutionGraph]) -> list[tuple[int, ...]]:
    """Union of the shortest paths inside each solution path graph.

    In a path graph these are exactly the contiguous runs of two or more
    vertices, read from the smaller endpoint.
    """
    found = set()
    for s in sols:
        seq = s.path.vertices
        for i in range(len(seq)):
            for j in range(i + 2, len(seq) + 1):
                run = seq[i:j]
                found.add(run if run[0] < run[-1] else tuple(reversed(run)))
    return sorted(found)


@dataclass
class RarityResult:
    rarity: float
    median: float
    interestingness: float
    median_interestingness: float
    n_claims: int


def interestingness(rar: float) -> float:
    return 1.0 / (1.0 + rar)


def rarity(sols_with_intermediates: Sequence[SolutionGraph], oracle: FrequencyOracle, lexicon: TermLexicon) -> RarityResult:
    """Mean literature frequency of the claims in intermediate solutions."""
    claims = claim_paths(sols_with_intermediates)
    if not claims:
        raise EvaluationError("no solutions with intermediates")
    counts, missing = [], []
    for p in claims:
        terms = [lexicon.decode(v) for v in p]
        c = oracle.get(terms)
        if c is None:
            missing.append(conjunction_key(terms))
        else:
            counts.append(c)
    if missing:
        raise MissingOracleKeysError(missing)
    mean = math.fsum(counts) / len(counts)
    med = float(statistics.median(counts))
    return RarityResult(mean, med, interestingness(mean), interestingness(med), len(counts))


def missing_oracle_keys(sols: Sequence[SolutionGraph], oracle: FrequencyOracle, lexicon: TermLexicon) -> list[str]:
    keys = {conjunction_key(lexicon.decode(v) for v in p) for p in claim_paths(sols)}
    return sorted(k for k in keys if k not in oracle.counts)


# -- topics ---------------------------------------------------------------------


@dataclass(frozen=True)
class TopicScores:
    top_d: float | None
    top_r: float | None
    top_n: float | None


def topic_scores(n_all: int, n_unique: int, n_relevant: int, n_novel: int) -> TopicScores:
    """Topical density, relative relevance and relative novelty."""
    if min(n_all, n_unique, n_relevant, n_novel) < 0:
        raise EvaluationError("topic counts must be non-negative")
    if not (n_unique <= n_all and n_relevant <= n_unique and n_novel <= n_relevant):
        raise EvaluationError("inconsistent topic counts: need novel <= relevant <= unique <= all")

    def ratio(a: int, b: int) -> float | None:
        return a / b if b else None

    return TopicScores(ratio(n_unique, n_all), ratio(n_relevant, n_unique), ratio(n_novel, n_relevant))


@dataclass(frozen=True)
class TopicLabel:
    solution: str
    topic: str
    relevant: bool
    novel: bool

    def __post_init__(self):
        if self.novel and not self.relevant:
            raise EvaluationError(f"topic {self.topic!r} is novel but not relevant")


def read_topic_labels(path: str | Path) -> list[TopicLabel]:
    """TSV ``solution<TAB>topic<TAB>relevant<TAB>novel`` with 0/1 flags."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            sol, topic, rel, nov = line.split("\t")
            out.append(TopicLabel(sol, normalize_term(topic), rel.strip() in ("1", "true", "yes"), nov.strip() in ("1", "true", "yes")))
    return out


def topic_scores_from_labels(labels: Sequence[TopicLabel]) -> TopicScores:
    by_topic: dict[str, TopicLabel] = {}
    for lab in labels:
        prev = by_topic.get(lab.topic)
        if prev is not None and (prev.relevant, prev.novel) != (lab.relevant, lab.novel):
            raise EvaluationError(f"conflicting labels for topic {lab.topic!r}")
        by_topic[lab.topic] = lab
    return topic_scores(
        len(labels),
        len(by_topic),
        sum(l.relevant for l in by_topic.values()),
        sum(l.novel for l in by_topic.values()),
    )


# -- per-generation metrics ----------------------------------------------------------


@dataclass
class GenerationMetrics:
    generation: int
    mean_evdr_all: float
    mean_evdr_present: float | None
    intermediates_present: int
    claims_total: int
    claims_intermediate: int
    evdr: dict[str, float | None] = field(default_factory=dict)


def evaluate_generation(
    snapshot: GenerationSnapshot,
    universe: UniverseGraph,
    task: ResolvedTask,
    delta,
    labeling: ClusterLabeling,
    k: int = 1,
    mode: str = FULL_PAIRWISE,
) -> tuple[list[SolutionGraph], GenerationMetrics]:
    sols = solutions(union_graph(snapshot, universe), task, delta, labeling, k, mode)
    per = {name: evd_r(sols, ids) for name, ids in task.intermediates.items()}
    present = [v for v in per.values() if v is not None]
    n_inter = len(per)
    row = GenerationMetrics(
        generation=snapshot.generation,
        mean_evdr_all=math.fsum(present) / n_inter if n_inter else 0.0,
        mean_evdr_present=math.fsum(present) / len(present) if present else None,
        intermediates_present=len(present),
        claims_total=len(sols),
        claims_intermediate=len(_hits(sols, task.any_intermediate)),
        evdr=per,
    )
    return sols, row


def generation_metrics(snapshots: Sequence[GenerationSnapshot], universe: UniverseGraph, task: ResolvedTask, delta, labeling, k: int = 1, mode: str = FULL_PAIRWISE) -> list[GenerationMetrics]:
    if not snapshots:
        raise EvaluationError("no snapshots")
    return [evaluate_generation(s, universe, task, delta, labeling, k, mode)[1] for s in snapshots]


def metrics_to_csv(rows: Sequence[GenerationMetrics]) -> str:
    names = sorted({n for r in rows for n in r.evdr})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["generation", "mean_evdr_all", "mean_evdr_present", "intermediates_present", "claims_total", "claims_intermediate"] + [f"evdr:{n}" for n in names])
    for r in rows:
        cells = [r.generation, fmt_float(r.mean_evdr_all), "" if r.mean_evdr_present is None else fmt_float(r.mean_evdr_present), r.intermediates_present, r.claims_total, r.claims_intermediate]
        cells += ["" if r.evdr.get(n) is None else fmt_float(r.evdr[n]) for n in names]
        w.writerow(cells)
    return buf.getvalue()


def select_generation(rows: Sequence[GenerationMetrics], selector: str | int = "best-evdr") -> int:
    """Generation index by the best mean evd^r (earliest wins ties) or explicitly."""
    if not rows:
        raise EvaluationError("no generations to select from")
    if selector == "best-evdr":
        best = max(rows, key=lambda r: (r.mean_evdr_all, -r.generation))
        return best.generation
    g = int(selector)
    if g not in {r.generation for r in rows}:
        raise EvaluationError(f"generation {g} not available")
    return g


def solutions_to_tsv(sols: Sequence[SolutionGraph], lexicon: TermLexicon | None = None) -> str:
    lines = ["rank\tscore\tpath\tterms\t" + ",".join(MEASURES) + "\n"]
    for s in sols:
        terms = " | ".join(lexicon.decode(v) for v in s.path.vertices) if lexicon else ""
        vals = ",".join(fmt_float(x) if not float(x).is_integer() or i != 4 else str(int(x)) for i, x in enumerate(s.virtues.values()))
        lines.append(f"{s.rank}\t{fmt_float(s.score)}\t{'-'.join(map(str, s.path.vertices))}\t{terms}\t{vals}\n")
    return "".join(lines)
