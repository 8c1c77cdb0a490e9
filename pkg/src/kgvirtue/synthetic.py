"""Seeded synthetic co-occurrence corpora with planted topic structure."""

from __future__ import annotations

import numpy as np

from .ingest import BaseStatement


def topic_corpus(
    n_terms: int,
    n_statements: int,
    n_topics: int = 10,
    cross_rate: float = 0.05,
    seed: int = 0,
    prefix: str = "term",
) -> list[BaseStatement]:
    """Statements drawn mostly within topics, rarely across them.

    Every term occurs at least once.  Within a topic, partners follow a
    Zipf-like preference so some terms become hubs.
    """
    rng = np.random.default_rng(seed)
    terms = [f"{prefix} {i:04d}" for i in range(n_terms)]
    topic_of = np.arange(n_terms) % n_topics
    members = [np.nonzero(topic_of == t)[0] for t in range(n_topics)]
    prefs = [1.0 / np.arange(1, len(m) + 1) for m in members]
    prefs = [p / p.sum() for p in prefs]
    out = []
    for i in range(n_statements):
        a = i % n_terms if i < n_terms else int(rng.integers(n_terms))
        t = topic_of[a]
        if rng.random() < cross_rate:
            t = int(rng.integers(n_topics))
        b = a
        while b == a:
            b = int(rng.choice(members[t], p=prefs[t]))
        w = float(np.round(rng.uniform(0.2, 1.0), 3))
        out.append(BaseStatement(terms[a], terms[b], w, f"doc{int(rng.integers(n_statements // 4 + 1)):05d}"))
    return out


def statements_to_tsv(statements) -> str:
    return "".join(f"{s.term_a}\t{s.term_b}\t{s.distance_weight}\t{s.doc_id}\n" for s in statements)


DEMO_SOURCE = "fish oil"
DEMO_TARGET = "raynaud"
DEMO_SOURCE_TERMS = ("fish oil", "dietary fish oil", "fish oil supplement")
DEMO_TARGET_TERMS = ("raynaud disease", "raynaud phenomenon", "primary raynaud", "raynaud syndrome")
DEMO_INTERMEDIATES = ("blood viscosity", "platelet aggregation", "vascular reactivity")


def discovery_corpus(n_statements: int = 200, seed: int = 0) -> list[BaseStatement]:
    """Two literatures that only meet through a few intermediate terms.

    Source-side documents mention the source and lipid terms, target-side
    documents mention the target and vascular terms; the intermediates
    appear in both, and background terms add noise.
    """
    rng = np.random.default_rng(seed)
    lipid = list(DEMO_SOURCE_TERMS) + [f"lipid factor {i:02d}" for i in range(1, 9)]
    vascular = list(DEMO_TARGET_TERMS) + [f"vascular factor {i:02d}" for i in range(1, 8)]
    background = [f"background term {i:02d}" for i in range(1, 13)]
    inter = list(DEMO_INTERMEDIATES)
    groups = [
        (0.35, lipid + inter[:2]),
        (0.35, vascular + inter),
        (0.18, background),
        (0.12, lipid[3:] + vascular[4:] + background),
    ]
    weights = np.array([g[0] for g in groups])
    out = []
    n_docs = max(1, n_statements // 4)
    for _ in range(n_statements):
        terms = groups[int(rng.choice(len(groups), p=weights / weights.sum()))][1]
        # hubs: the first terms of each group are drawn more often
        p = 1.0 / np.sqrt(np.arange(1, len(terms) + 1))
        a, b = rng.choice(len(terms), size=2, replace=False, p=p / p.sum())
        w = float(np.round(rng.uniform(0.3, 1.0), 3))
        out.append(BaseStatement(terms[int(a)], terms[int(b)], w, f"doc{int(rng.integers(n_docs)):04d}"))
    return out


def document_frequency_oracle(statements, conjunctions) -> dict[str, int]:
    """Count documents whose statements mention every term of a conjunction.

    A corpus-local stand-in for literature hit counts, used to populate
    offline frequency oracles.
    """
    from .evaluation import KEY_SEPARATOR, conjunction_key

    docs: dict[str, set[str]] = {}
    for s in statements:
        docs.setdefault(s.doc_id, set()).update((s.term_a, s.term_b))
    out = {}
    for terms in conjunctions:
        key = conjunction_key(terms)
        need = set(key.split(KEY_SEPARATOR))
        out[key] = sum(1 for d in docs.values() if need <= d)
    return out
