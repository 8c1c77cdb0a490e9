"""Co-occurrence statements to a weighted universe graph.

Statement files are TSV with four columns: ``term_a``, ``term_b``, the
sentence-distance weight ``w_d`` in (0, 1], and a document id.
"""

from __future__ import annotations

import json
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ._io import atomic_write_text, fmt_float
from .graph import Edge, UniverseGraph, edge_key


class IngestError(ValueError):
    pass


class EmptyUniverseError(IngestError):
    pass


_WS = re.compile(r"\s+")


def normalize_term(text: str) -> str:
    return _WS.sub(" ", text.strip().lower())


@dataclass(frozen=True)
class BaseStatement:
    term_a: str
    term_b: str
    distance_weight: float
    doc_id: str


@dataclass
class ParseReport:
    source: str
    accepted: int = 0
    rejected: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {"source": self.source, "accepted": self.accepted, "rejected_count": len(self.rejected), "rejected": self.rejected},
            indent=2,
            sort_keys=True,
        ) + "\n"


def parse_statements(source: str | Path) -> tuple[list[BaseStatement], ParseReport]:
    """Read a statement TSV; malformed lines go to the report, not the result."""
    report = ParseReport(source=Path(source).name)
    statements = []
    with open(source, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                report.rejected.append({"line": lineno, "reason": f"expected 4 fields, got {len(parts)}"})
                continue
            a, b = normalize_term(parts[0]), normalize_term(parts[1])
            if not a or not b:
                report.rejected.append({"line": lineno, "reason": "empty term"})
                continue
            if a == b:
                report.rejected.append({"line": lineno, "reason": "identical terms"})
                continue
            try:
                w = float(parts[2])
            except ValueError:
                report.rejected.append({"line": lineno, "reason": f"weight {parts[2]!r} is not a number"})
                continue
            if not (0.0 < w <= 1.0) or math.isnan(w):
                report.rejected.append({"line": lineno, "reason": f"weight {w} outside (0, 1]"})
                continue
            statements.append(BaseStatement(a, b, w, parts[3].strip()))
    report.accepted = len(statements)
    return statements, report


@dataclass(frozen=True)
class PairScore:
    pair: tuple[str, str]
    npmi: float


def npmi_scores(statements: Sequence[BaseStatement], weighted: bool = True) -> list[PairScore]:
    """Normalised PMI for every co-occurring term pair.

    Probabilities are mass fractions: each statement contributes its
    ``w_d`` (or 1 when ``weighted`` is false) to its pair and to both of
    its terms.  A pair whose joint probability is 1 scores +1.
    """
    if not statements:
        raise IngestError("no statements")
    joint: dict[tuple[str, str], float] = defaultdict(float)
    single: dict[str, float] = defaultdict(float)
    total = 0.0
    for st in statements:
        w = st.distance_weight if weighted else 1.0
        a, b = sorted((st.term_a, st.term_b))
        joint[(a, b)] += w
        single[a] += w
        single[b] += w
        total += w
    scores = []
    for pair in sorted(joint):
        pxy = joint[pair] / total
        if pxy <= 0.0:
            continue
        px, py = single[pair[0]] / total, single[pair[1]] / total
        if pxy >= 1.0:
            value = 1.0
        else:
            value = math.log(pxy / (px * py)) / -math.log(pxy)
            value = min(1.0, max(-1.0, value))
        scores.append(PairScore(pair, value))
    return scores


class TermLexicon:
    """Bijection between normalized terms and integer vertex ids.

    Ids are assigned in sorted term order so the encoding only depends on
    the vocabulary.
    """

    def __init__(self, terms: Iterable[str]):
        self.terms = sorted({normalize_term(t) for t in terms})
        self.ids = {t: i for i, t in enumerate(self.terms)}

    def encode(self, term: str) -> int:
        return self.ids[normalize_term(term)]

    def decode(self, vid: int) -> str:
        return self.terms[vid]

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return normalize_term(term) in self.ids

    def to_tsv(self) -> str:
        return "".join(f"{i}\t{t}\n" for i, t in enumerate(self.terms))

    @classmethod
    def read(cls, path: str | Path) -> "TermLexicon":
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    vid, term = line.split("\t", 1)
                    pairs.append((int(vid), term))
        lex = cls(t for _, t in pairs)
        for vid, term in pairs:
            if lex.ids[term] != vid:
                raise IngestError(f"lexicon file {path} is not in canonical order at id {vid}")
        return lex


def tokenize(text: str) -> list[str]:
    return [tok for tok in re.split(r"[^\w]+", normalize_term(text)) if tok]


class FulltextIndex:
    """Inverted index over lexical vertex labels."""

    def __init__(self, lexicon: TermLexicon):
        self.lexicon = lexicon
        self.postings: dict[str, set[int]] = defaultdict(set)
        for vid, term in enumerate(lexicon.terms):
            for tok in tokenize(term):
                self.postings[tok].add(vid)

    def to_tsv(self) -> str:
        return "".join(f"{tok}\t{','.join(map(str, sorted(ids)))}\n" for tok, ids in sorted(self.postings.items()))


@dataclass
class Pruning:
    """Manual include/exclude rules, optionally scoped to one query.

    File format: one rule per line, ``+item`` to include or ``-item``
    (also ``−item``) to exclude, where ``item`` is a vertex id or a term.
    A ``[query text]`` line scopes the following rules to that query;
    rules before any header apply to every query.
    """

    include: dict[str | None, set[int]] = field(default_factory=lambda: defaultdict(set))
    exclude: dict[str | None, set[int]] = field(default_factory=lambda: defaultdict(set))

    @classmethod
    def read(cls, path: str | Path, lexicon: TermLexicon) -> "Pruning":
        rules = cls()
        scope: str | None = None
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if line.startswith("[") and line.endswith("]"):
                    scope = normalize_term(line[1:-1])
                    continue
                sign, item = line[0], line[1:].strip()
                if sign not in "+-−" or not item:
                    raise IngestError(f"{path}:{lineno}: rule must start with + or -")
                if item in lexicon:
                    vid = lexicon.encode(item)
                elif item.isdigit():
                    vid = int(item)
                else:
                    raise IngestError(f"{path}:{lineno}: unknown term {item!r}")
                (rules.include if sign == "+" else rules.exclude)[scope].add(vid)
        return rules

    def apply(self, query: str, ids: set[int]) -> set[int]:
        q = normalize_term(query)
        out = set(ids)
        for scope in (None, q):
            out |= self.include.get(scope, set())
        for scope in (None, q):
            out -= self.exclude.get(scope, set())
        return out


def lookup_term(index: FulltextIndex, query: str, pruning: Pruning | None = None) -> set[int]:
    """Vertices whose label contains every token of ``query``."""
    tokens = tokenize(query)
    result: set[int] = set()
    if tokens:
        sets = [index.postings.get(tok, set()) for tok in tokens]
        result = set.intersection(*sets) if all(sets) else set()
    if pruning is not None:
        result = pruning.apply(query, result)
    return result


def build_universe(
    scores: Sequence[PairScore],
    lexicon: TermLexicon,
    mode: str = "above_average_positive",
    threshold: float = 0.0,
) -> UniverseGraph:
    """Keep significant pairs as edges weighted by their NPMI.

    ``above_average_positive`` keeps pairs with NPMI above zero and above
    the mean of the positive scores; ``absolute_threshold`` keeps pairs
    with NPMI strictly above ``threshold`` (and above zero).
    """
    if not scores:
        raise EmptyUniverseError("no pair scores")
    if mode == "above_average_positive":
        positive = [s.npmi for s in scores if s.npmi > 0]
        if not positive:
            raise EmptyUniverseError("no positive NPMI scores")
        cut = math.fsum(positive) / len(positive)
    elif mode == "absolute_threshold":
        cut = threshold
    else:
        raise IngestError(f"unknown universe mode {mode!r}")
    edges: dict[Edge, float] = {}
    for s in scores:
        if s.npmi > 0 and s.npmi > cut:
            edges[edge_key(lexicon.encode(s.pair[0]), lexicon.encode(s.pair[1]))] = min(1.0, s.npmi)
    if not edges:
        raise EmptyUniverseError(f"no pair survives the {mode} filter")
    universe = UniverseGraph(edges)
    universe.vertex_labels["term"] = {v: lexicon.decode(v) for v in universe.vertices}
    return universe


def scores_to_tsv(scores: Sequence[PairScore]) -> str:
    return "".join(f"{a}\t{b}\t{fmt_float(s.npmi)}\n" for s in scores for a, b in [s.pair])


def write_ingest_outputs(out_dir: Path, lexicon: TermLexicon, index: FulltextIndex, scores, universe, report) -> dict[str, Path]:
    paths = {
        "lexicon": out_dir / "lexicon.tsv",
        "index": out_dir / "index.tsv",
        "scores": out_dir / "pair_scores.tsv",
        "universe": out_dir / "universe.tsv",
        "labels": out_dir / "universe_labels.tsv",
        "rejections": out_dir / "rejections.json",
    }
    atomic_write_text(paths["lexicon"], lexicon.to_tsv())
    atomic_write_text(paths["index"], index.to_tsv())
    atomic_write_text(paths["scores"], scores_to_tsv(scores))
    universe.write(paths["universe"], paths["labels"])
    atomic_write_text(paths["rejections"], report.to_json())
    return paths
