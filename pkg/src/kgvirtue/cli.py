"""Command line driver: build, cluster, refine, rank, evaluate, stats.

Every stage writes into its own directory under the configured output
directory, together with a copy of the resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ._io import atomic_write_text, file_digest, fmt_float
from .cluster import ClusterLabeling, bucketed_kmeans, threshold_clique_clusters
from .config import ConfigError, PipelineConfig, load_config
from .evaluation import (
    DiscoveryTask,
    EvaluationError,
    FrequencyOracle,
    evaluate_generation,
    evd,
    evd_r,
    metrics_to_csv,
    missing_oracle_keys,
    rarity,
    read_topic_labels,
    resolve_task,
    select_generation,
    solutions_to_tsv,
    topic_scores_from_labels,
    union_graph,
)
from .evolve import GenerationSnapshot, list_generations, load_snapshots, read_snapshot, run
from .graph import DistanceOracle, GraphError, UniverseGraph, build_context_vectors, graph_stats
from .ingest import (
    FulltextIndex,
    IngestError,
    TermLexicon,
    build_universe,
    npmi_scores,
    parse_statements,
    write_ingest_outputs,
)
from .plots import plot_degree_distribution, plot_generation_metrics
from .virtues import MEASURES

log = logging.getLogger("kgvirtue")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class DataError(Exception):
    """Bad or missing input data; maps to exit code 2."""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- artifact locations ----------------------------------------------------------


def _stage_dir(cfg: PipelineConfig, stage: str) -> Path:
    d = cfg.out / stage
    d.mkdir(parents=True, exist_ok=True)
    return d


def _universe_paths(cfg: PipelineConfig) -> tuple[Path, Path]:
    p = cfg.path("universe") or cfg.out / "build" / "universe.tsv"
    return p, p.with_name(p.stem + "_labels.tsv")


def _require(path: Path | None, stage: str | None, what: str) -> Path:
    if path is None or not path.exists():
        if stage is None:
            raise DataError(f"{what} {path} not found")
        raise DataError(f"missing {what} from stage '{stage}' ({path}); run `kgvirtue {stage}` first")
    return path


def _load_universe(cfg: PipelineConfig) -> UniverseGraph:
    edges, labels = _universe_paths(cfg)
    _require(edges, "build", "universe")
    return UniverseGraph.read(edges, labels if labels.exists() else None)


def _load_lexicon(cfg: PipelineConfig) -> TermLexicon:
    p = cfg.path("lexicon") or cfg.out / "build" / "lexicon.tsv"
    return TermLexicon.read(_require(p, "build", "lexicon"))


def _load_labeling(cfg: PipelineConfig, universe: UniverseGraph) -> ClusterLabeling:
    p = cfg.path("labeling") or cfg.out / "cluster" / "labeling.tsv"
    return ClusterLabeling.read(_require(p, "cluster", "labeling"), universe.vertices)


def _snapshot_root(cfg: PipelineConfig) -> Path:
    return cfg.path("snapshots") or cfg.out / "refine"


def _load_snapshots(cfg: PipelineConfig, include_initial: bool = False) -> list[GenerationSnapshot]:
    root = _snapshot_root(cfg)
    if not list_generations(root):
        raise DataError(f"missing snapshots from stage 'refine' ({root}); run `kgvirtue refine` first")
    return load_snapshots(root, include_initial=include_initial)


def _delta(universe: UniverseGraph) -> DistanceOracle:
    return DistanceOracle(build_context_vectors(universe))


def _digests(paths) -> dict[str, str]:
    return {Path(p).name: file_digest(p) for p in sorted(paths, key=str)}


def _finish(cfg: PipelineConfig, stage_dir: Path, summary: dict) -> None:
    cfg.write_resolved(stage_dir)
    atomic_write_text(stage_dir / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=1, sort_keys=True))


# -- commands ---------------------------------------------------------------------


def cmd_build(cfg: PipelineConfig, args) -> None:
    src = cfg.path("statements")
    if src is None or not src.is_file():
        raise DataError(f"statements file {src} not found")
    statements, report = parse_statements(src)
    if not statements:
        raise DataError(f"no statements accepted from {src} ({len(report.rejected)} rejected)")
    scores = npmi_scores(statements, weighted=cfg.ingest.weighted)
    terms = sorted({s.term_a for s in statements} | {s.term_b for s in statements})
    lexicon = TermLexicon(terms)
    universe = build_universe(scores, lexicon, cfg.ingest.npmi_mode, cfg.ingest.threshold)
    out = _stage_dir(cfg, "build")
    paths = write_ingest_outputs(out, lexicon, FulltextIndex(lexicon), scores, universe, report)
    _finish(cfg, out, {
        "statements": report.accepted,
        "rejected": len(report.rejected),
        "terms": len(lexicon),
        "vertices": len(universe.vertices),
        "edges": len(universe.weights),
        "digests": _digests(paths.values()),
    })


def cmd_cluster(cfg: PipelineConfig, args) -> None:
    universe = _load_universe(cfg)
    if cfg.cluster.mode == "threshold_clique":
        labeling = threshold_clique_clusters(_delta(universe), universe.vertices, cfg.cluster.tau)
    else:
        labeling = bucketed_kmeans(build_context_vectors(universe), cfg.kmeans_config())
    out = _stage_dir(cfg, "cluster")
    labeling.write(out / "labeling.tsv")
    _finish(cfg, out, {
        "mode": cfg.cluster.mode,
        "clusters": len(labeling.labels),
        "digests": _digests([out / "labeling.tsv"]),
    })


def cmd_refine(cfg: PipelineConfig, args) -> None:
    universe = _load_universe(cfg)
    labeling = _load_labeling(cfg, universe)
    ga = cfg.ga_config()
    root = _snapshot_root(cfg)
    root.mkdir(parents=True, exist_ok=True)
    snaps = run(universe, labeling, _delta(universe), ga, workers=cfg.workers, out_dir=root, resume=args.resume)
    manifest = root / "manifest.json"
    cfg.write_resolved(root)
    summary = {
        "generations": len(snaps),
        "sizes": [s.size for s in snaps],
        "manifest_digest": file_digest(manifest),
    }
    atomic_write_text(root / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=1, sort_keys=True))


def _pick_snapshot(cfg: PipelineConfig, selector) -> GenerationSnapshot:
    root = _snapshot_root(cfg)
    gens = list_generations(root)
    if not gens:
        raise DataError(f"missing snapshots from stage 'refine' ({root}); run `kgvirtue refine` first")
    g = gens[-1] if selector in (None, "latest") else int(selector)
    if g not in gens:
        raise DataError(f"generation {g} not in {root} (have {gens[0]}..{gens[-1]})")
    return read_snapshot(root / f"gen_{g:04d}")


def cmd_rank(cfg: PipelineConfig, args) -> None:
    snap = _pick_snapshot(cfg, args.generation)
    lines = ["rank\tid\tscore\t" + ",".join(MEASURES) + "\n"]
    for r, m in enumerate(snap.members, 1):
        v = m.virtues
        vals = ",".join([fmt_float(v.conservatism), fmt_float(v.modesty), fmt_float(v.simplicity_local),
                         fmt_float(v.simplicity_global), str(v.generality), fmt_float(v.refutability)])
        lines.append(f"{r}\tg{snap.generation}:{r - 1}\t{fmt_float(m.score)}\t{vals}\n")
    out = _stage_dir(cfg, "rank")
    path = out / f"ranking_gen_{snap.generation:04d}.tsv"
    atomic_write_text(path, "".join(lines))
    _finish(cfg, out, {"generation": snap.generation, "hypotheses": snap.size, "digests": _digests([path])})


def cmd_evaluate(cfg: PipelineConfig, args) -> None:
    task_path = _require(cfg.path("task"), None, "task file")
    universe = _load_universe(cfg)
    labeling = _load_labeling(cfg, universe)
    lexicon = _load_lexicon(cfg)
    task = DiscoveryTask.read(task_path)
    if cfg.path("pruning") is not None and not task.pruning:
        task.pruning = str(cfg.path("pruning"))
    resolved = resolve_task(task, FulltextIndex(lexicon))
    delta = _delta(universe)
    ga = cfg.ga_config()
    snaps = _load_snapshots(cfg, include_initial=True)
    per_gen = {}
    rows = []
    for s in snaps:
        sols, row = evaluate_generation(s, universe, resolved, delta, labeling, ga.k_refut, ga.multigraph_mode)
        per_gen[s.generation] = sols
        rows.append(row)
    # generation 0 is the initial population; selection is over refined generations
    refined = [r for r in rows if r.generation > 0]
    chosen = select_generation(refined, args.generation)
    sols = per_gen[chosen]
    out = _stage_dir(cfg, "evaluate")
    files = {
        "metrics.csv": metrics_to_csv(rows),
        f"solutions_gen_{chosen:04d}.tsv": solutions_to_tsv(sols, lexicon),
    }
    report = {
        "task": task.name,
        "generation": chosen,
        "selector": str(args.generation),
        "solutions": len(sols),
        "union_vertices": len(union_graph(next(s for s in snaps if s.generation == chosen), universe).vertices),
        "intermediates": {
            name: {"evd": evd(sols, ids), "evd_r": evd_r(sols, ids), "resolved": sorted(ids)}
            for name, ids in sorted(resolved.intermediates.items())
        },
    }
    hits = [s for s in sols if set(s.interior) & resolved.any_intermediate]
    if cfg.path("oracle") is not None:
        oracle = FrequencyOracle.read(_require(cfg.path("oracle"), None, "frequency oracle"))
        missing = missing_oracle_keys(hits, oracle, lexicon)
        if missing:
            atomic_write_text(out / "missing_oracle_keys.tsv", "".join(f"{k}\t\n" for k in missing))
            raise DataError(f"{len(missing)} conjunctions missing from the oracle; listed in {out / 'missing_oracle_keys.tsv'}")
        if hits:
            rr = rarity(hits, oracle, lexicon)
            report["rarity"] = {"mean": rr.rarity, "median": rr.median, "interestingness": rr.interestingness,
                                "median_interestingness": rr.median_interestingness, "claims": rr.n_claims}
    if cfg.path("topics") is not None:
        ts = topic_scores_from_labels(read_topic_labels(_require(cfg.path("topics"), None, "topic labels file")))
        report["topics"] = {"top_d": ts.top_d, "top_r": ts.top_r, "top_n": ts.top_n}
    files["evaluation.json"] = json.dumps(report, indent=1, sort_keys=True) + "\n"
    for name, text in files.items():
        atomic_write_text(out / name, text)
    fig = plot_generation_metrics(rows, out / "generation_metrics.png", title=task.name)
    cfg.write_resolved(out)
    summary = {"generation": chosen, "solutions": len(sols), "digests": _digests([out / n for n in files] + [fig])}
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=1, sort_keys=True))


def cmd_stats(cfg: PipelineConfig, args) -> None:
    universe = _load_universe(cfg)
    choice = args.graph
    if choice == "universe":
        graph, name = universe, "universe"
    elif choice.startswith("generation:"):
        snap = _pick_snapshot(cfg, choice.split(":", 1)[1])
        graph, name = union_graph(snap, universe), f"union_gen_{snap.generation:04d}"
    else:
        p = Path(choice)
        if not p.is_file():
            raise DataError(f"graph file {p} not found")
        graph, name = UniverseGraph.read(p), p.stem
    delta = _delta(universe)
    stats = graph_stats(graph, delta)
    out = _stage_dir(cfg, "stats")
    tsv, js = out / f"{name}.tsv", out / f"{name}.json"
    atomic_write_text(tsv, stats.to_tsv())
    atomic_write_text(js, json.dumps(stats.as_dict(), indent=1, sort_keys=True) + "\n")
    fig = plot_degree_distribution(stats.degree_histogram, out / f"{name}_degrees.png", title=name)
    cfg.write_resolved(out)
    summary = {"graph": name, **{k: v for k, v in stats.as_dict().items() if k != "degree_histogram"},
               "digests": _digests([tsv, js, fig])}
    atomic_write_text(out / "summary.json", json.dumps(summary, indent=1, sort_keys=True) + "\n")
    sys.stdout.write(stats.to_tsv())


COMMANDS = {
    "build": (cmd_build, "parse statements and build the universe graph"),
    "cluster": (cmd_cluster, "cluster universe vertices"),
    "refine": (cmd_refine, "evolve high-virtue subgraphs"),
    "rank": (cmd_rank, "rank the hypotheses of one generation"),
    "evaluate": (cmd_evaluate, "score generations against a discovery task"),
    "stats": (cmd_stats, "graph statistics and degree distribution"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgvirtue", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="YAML pipeline config")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--workers", type=int, help="scoring worker processes")
        p.add_argument("--out", type=Path, help="output directory")
        if name == "refine":
            p.add_argument("--resume", action="store_true", help="continue from the latest snapshot")
        if name == "rank":
            p.add_argument("--generation", default="latest", help="generation number or 'latest'")
        if name == "evaluate":
            p.add_argument("--generation", default="best-evdr", help="'best-evdr' or a generation number")
        if name == "stats":
            p.add_argument("--graph", default="universe", help="'universe', 'generation:N' or an edge TSV")
    return parser


def _configure(args) -> PipelineConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.paths.out = str(args.out.resolve())
    cfg.validate()
    if args.command == "evaluate" and args.generation != "best-evdr":
        try:
            int(args.generation)
        except ValueError:
            raise UsageError(f"--generation must be 'best-evdr' or an integer, not {args.generation!r}")
    if args.command == "rank" and args.generation != "latest":
        try:
            int(args.generation)
        except ValueError:
            raise UsageError(f"--generation must be 'latest' or an integer, not {args.generation!r}")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _configure(args)
    except (ConfigError, UsageError) as exc:
        print(f"kgvirtue {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command][0](cfg, args)
    except (DataError, IngestError, GraphError, EvaluationError, FileNotFoundError) as exc:
        print(f"kgvirtue {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"kgvirtue {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
