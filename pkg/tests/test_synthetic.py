from pathlib import Path

from kgvirtue.graph import connected_components
from kgvirtue.ingest import FulltextIndex, TermLexicon, build_universe, lookup_term, npmi_scores, parse_statements
from kgvirtue.synthetic import (
    DEMO_INTERMEDIATES,
    DEMO_SOURCE_TERMS,
    DEMO_TARGET_TERMS,
    discovery_corpus,
    document_frequency_oracle,
    statements_to_tsv,
    topic_corpus,
)

DEMO = Path(__file__).resolve().parent.parent / "data" / "demo"


def test_shipped_demo_corpus_is_regenerable():
    assert (DEMO / "statements.tsv").read_text(encoding="utf-8") == statements_to_tsv(discovery_corpus(200, seed=0))


def test_discovery_corpus_shape():
    sts = discovery_corpus(200, seed=0)
    assert len(sts) == 200
    assert discovery_corpus(200, seed=0) == sts
    assert discovery_corpus(200, seed=1) != sts
    terms = {t for s in sts for t in (s.term_a, s.term_b)}
    assert set(DEMO_SOURCE_TERMS) | set(DEMO_TARGET_TERMS) | set(DEMO_INTERMEDIATES) <= terms
    # the source and target literatures never meet directly
    src, tgt = set(DEMO_SOURCE_TERMS), set(DEMO_TARGET_TERMS)
    assert not any({s.term_a, s.term_b} & src and {s.term_a, s.term_b} & tgt for s in sts)


def test_demo_universe_connected(tmp_path):
    sts, report = parse_statements(DEMO / "statements.tsv")
    assert report.accepted == 200
    lex = TermLexicon({t for s in sts for t in (s.term_a, s.term_b)})
    u = build_universe(npmi_scores(sts), lex)
    assert len(connected_components(u)) == 1
    index = FulltextIndex(lex)
    assert len(lookup_term(index, "raynaud")) == len(DEMO_TARGET_TERMS)


def test_document_frequency_oracle():
    sts = discovery_corpus(50, seed=2)
    a, b = sts[0].term_a, sts[0].term_b
    counts = document_frequency_oracle(sts, [(a, b), (a,)])
    docs_a = {s.doc_id for s in sts if a in (s.term_a, s.term_b)}
    assert list(counts.values())[1] == len(docs_a)
    assert 1 <= list(counts.values())[0] <= len(docs_a)


def test_topic_corpus_deterministic():
    assert topic_corpus(40, 100, n_topics=4, seed=3) == topic_corpus(40, 100, n_topics=4, seed=3)
