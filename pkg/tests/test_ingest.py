import json
import math
from collections import Counter

import numpy as np
import pytest

from kgvirtue.ingest import (
    BaseStatement,
    EmptyUniverseError,
    FulltextIndex,
    IngestError,
    PairScore,
    Pruning,
    TermLexicon,
    build_universe,
    lookup_term,
    normalize_term,
    npmi_scores,
    parse_statements,
    write_ingest_outputs,
)


def _st(a, b, w=1.0, doc="d"):
    return BaseStatement(a, b, w, doc)


def _npmi_oracle(statements, weighted=True):
    """Counts-as-matrix estimator, written independently of the library."""
    terms = sorted({t for s in statements for t in (s.term_a, s.term_b)})
    idx = {t: i for i, t in enumerate(terms)}
    m = np.zeros((len(terms), len(terms)))
    for s in statements:
        w = s.distance_weight if weighted else 1.0
        i, j = idx[s.term_a], idx[s.term_b]
        m[i, j] += w
        m[j, i] += w
    total = m.sum() / 2
    marg = m.sum(axis=1) / total
    out = {}
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            if m[i, j] == 0:
                continue
            pxy = m[i, j] / total
            v = 1.0 if pxy >= 1 else math.log(pxy / (marg[i] * marg[j])) / -math.log(pxy)
            out[(terms[i], terms[j])] = max(-1.0, min(1.0, v))
    return out


def test_normalize_term():
    assert normalize_term("  Fish   OIL\t") == "fish oil"


def test_parse_statements(tmp_path):
    p = tmp_path / "s.tsv"
    p.write_text(
        "fish oil\tplatelet\t0.5\tpmid1\n"
        "a\tb\t0.5\n"
        "a\ta\t0.5\td\n"
        "a\tb\tzero\td\n"
        "a\tb\t1.5\td\n"
        "\tb\t0.5\td\n"
        "fish oil\tplatelet\t0.5\tpmid1\n"
    )
    statements, report = parse_statements(p)
    assert statements == [_st("fish oil", "platelet", 0.5, "pmid1")] * 2
    assert report.accepted == 2
    assert [r["line"] for r in report.rejected] == [2, 3, 4, 5, 6]
    assert json.loads(report.to_json())["accepted"] == 2


def test_duplicates_shift_probabilities():
    base = [_st("a", "b"), _st("b", "c"), _st("c", "d")]
    once = {s.pair: s.npmi for s in npmi_scores(base)}
    twice = {s.pair: s.npmi for s in npmi_scores(base + [_st("a", "b")])}
    assert once[("a", "b")] == pytest.approx(math.log(1.5) / math.log(3))
    assert twice[("a", "b")] == pytest.approx(math.log(4 / 3) / math.log(2))
    assert twice == pytest.approx(_npmi_oracle(base + [_st("a", "b")]))


def test_npmi_examples():
    assert npmi_scores([_st("a", "b")]) == [PairScore(("a", "b"), 1.0)]
    two = {s.pair: s.npmi for s in npmi_scores([_st("a", "b"), _st("c", "d")])}
    assert two[("a", "b")] == pytest.approx(1.0)
    shared = {s.pair: s.npmi for s in npmi_scores([_st("a", "b"), _st("a", "c")])}
    assert shared[("a", "b")] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(IngestError):
        npmi_scores([])


def test_npmi_range_and_symmetry_random_corpora():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n_terms = int(rng.integers(2, 9))
        n = int(rng.integers(1, 25))
        sts = []
        for _ in range(n):
            a, b = rng.choice(n_terms, size=2, replace=False)
            sts.append(_st(f"t{a}", f"t{b}", float(rng.uniform(0.01, 1.0))))
        for weighted in (True, False):
            got = {s.pair: s.npmi for s in npmi_scores(sts, weighted)}
            flipped = {s.pair: s.npmi for s in npmi_scores([_st(s.term_b, s.term_a, s.distance_weight) for s in sts], weighted)}
            assert got == flipped
            assert all(-1.0 <= v <= 1.0 for v in got.values())
            assert got == pytest.approx(_npmi_oracle(sts, weighted), abs=1e-12)


def _scores(values):
    return [PairScore((f"a{i}", f"b{i}"), v) for i, v in enumerate(values)]


def test_build_universe_modes():
    scores = _scores([0.9, 0.5, -0.2])
    lex = TermLexicon([t for s in scores for t in s.pair])
    u = build_universe(scores, lex)
    assert len(u.weights) == 1
    assert list(u.weights.values()) == [0.9]
    assert u.vertex_labels["term"] == {lex.encode("a0"): "a0", lex.encode("b0"): "b0"}
    u0 = build_universe(scores, lex, "absolute_threshold", 0.0)
    assert sorted(u0.weights.values()) == [0.5, 0.9]
    with pytest.raises(EmptyUniverseError):
        build_universe(_scores([0.4, 0.4]), TermLexicon(["a0", "b0", "a1", "b1"]))


def test_lexicon_and_lookup(tmp_path):
    lex = TermLexicon(["Platelet aggregation", "platelet", "aggregation of platelet cells", "blood"])
    assert lex.terms == sorted(lex.terms)
    index = FulltextIndex(lex)
    hits = lookup_term(index, "platelet aggregation")
    assert {lex.decode(v) for v in hits} == {"platelet aggregation", "aggregation of platelet cells"}
    assert lookup_term(index, "serotonin") == set()
    (tmp_path / "lex.tsv").write_text(lex.to_tsv())
    assert TermLexicon.read(tmp_path / "lex.tsv").terms == lex.terms


def test_pruning(tmp_path):
    terms = [f"platelet thing {i}" for i in range(10)]
    lex = TermLexicon(terms)
    index = FulltextIndex(lex)
    base = lookup_term(index, "platelet")
    assert 7 in base
    rules = tmp_path / "prune.txt"
    rules.write_text("-7\n[blood]\n+platelet thing 1\n")
    pr = Pruning.read(rules, lex)
    assert lookup_term(index, "platelet", pr) == base - {7}
    assert lookup_term(index, "blood", pr) == {lex.encode("platelet thing 1")}
    rules.write_text("*7\n")
    with pytest.raises(IngestError):
        Pruning.read(rules, lex)


def test_ingest_outputs_deterministic(tmp_path):
    sts = [_st("a", "b", 0.9), _st("b", "c", 0.3), _st("a", "b", 0.8), _st("c", "d", 0.5), _st("d", "e", 0.5)]
    digests = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        out.mkdir()
        scores = npmi_scores(sts)
        lex = TermLexicon({t for s in sts for t in (s.term_a, s.term_b)})
        u = build_universe(scores, lex)
        from kgvirtue.ingest import ParseReport

        paths = write_ingest_outputs(out, lex, FulltextIndex(lex), scores, u, ParseReport("s.tsv", len(sts)))
        digests.append({k2: p.read_bytes() for k2, p in paths.items()})
    assert digests[0] == digests[1]
    assert Counter(digests[0]["lexicon"].decode().splitlines()) == Counter(f"{i}\t{t}" for i, t in enumerate("abcde"))
