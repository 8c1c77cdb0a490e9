"""Regenerate data/demo/statements.tsv and data/demo/oracle.tsv.

The oracle holds document co-occurrence counts from the corpus itself for
every claim of every intermediate-containing solution in the demo run,
so evaluation works offline on any selected generation.

    python3 scripts/make_demo_data.py            # after build/cluster/refine
"""

import argparse
import sys
from pathlib import Path

from kgvirtue.cli import main as cli_main
from kgvirtue.cluster import ClusterLabeling
from kgvirtue.config import load_config
from kgvirtue.evaluation import DiscoveryTask, FrequencyOracle, claim_paths, resolve_task, solutions, union_graph
from kgvirtue.evolve import load_snapshots
from kgvirtue.graph import DistanceOracle, UniverseGraph, build_context_vectors
from kgvirtue.ingest import FulltextIndex, TermLexicon
from kgvirtue.synthetic import discovery_corpus, document_frequency_oracle, statements_to_tsv


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=Path(__file__).resolve().parent.parent / "data/demo/config.yaml")
    args = ap.parse_args(argv)
    demo = args.config.parent
    statements = discovery_corpus(200, seed=0)
    (demo / "statements.tsv").write_text(statements_to_tsv(statements), encoding="utf-8")
    for stage in ("build", "cluster", "refine"):
        if cli_main([stage, "--config", str(args.config)]) != 0:
            return 1
    cfg = load_config(args.config)
    out = cfg.out
    universe = UniverseGraph.read(out / "build/universe.tsv", out / "build/universe_labels.tsv")
    lexicon = TermLexicon.read(out / "build/lexicon.tsv")
    labeling = ClusterLabeling.read(out / "cluster/labeling.tsv", universe.vertices)
    task = resolve_task(DiscoveryTask.read(cfg.path("task")), FulltextIndex(lexicon))
    delta = DistanceOracle(build_context_vectors(universe))
    conj = set()
    for snap in load_snapshots(out / "refine", include_initial=True):
        sols = solutions(union_graph(snap, universe), task, delta, labeling)
        hits = [s for s in sols if set(s.interior) & task.any_intermediate]
        conj |= {tuple(lexicon.decode(v) for v in p) for p in claim_paths(hits)}
    oracle = FrequencyOracle(document_frequency_oracle(statements, sorted(conj)))
    (demo / "oracle.tsv").write_text(oracle.to_tsv(), encoding="utf-8")
    print(f"{len(oracle.counts)} oracle keys", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
