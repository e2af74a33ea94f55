"""
Command-line interface for the GTPM pipeline.

    python -m app.cli run --corpus data/reuters.jsonl --out-dir runs
    python -m app.cli sweep --corpus data/r8.tsv --walk-lengths 5,15,25
    python -m app.cli robustness --corpus data/ohsumed.jsonl --split-mode given-splits
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from pydantic import ValidationError

from app.core.config import Settings, load_settings
from app.core.exceptions import GTPMException
from app.core.logging_config import setup_logging
from app.models.config_models import ExperimentSpec, WalkConfig
from app.models.corpus_models import CorpusStats, DocumentRecord
from app.services.classifier import predict, select_hyperparameters, train_classifier
from app.services.corpus_loader import CorpusLoader
from app.services.embedding import DocumentEmbedder
from app.services.experiment_runner import DEFAULT_FRACTIONS, ExperimentRunner, export_projection
from app.services.metrics import evaluate, format_report, write_report_tsv
from app.services.persistence import ArtifactStore, graph_digest
from app.services.synthetic import SyntheticCorpusConfig, generate_corpus, write_corpus_jsonl
from app.services.text_normalizer import TextNormalizer, build_vocabulary
from app.services.walker import WeightedWalker, write_walk_dump
from app.services.word_graph import build_graph
from app.utils.format_helpers import FormatHelper

logger = logging.getLogger("app.cli")

FULL_SCALE = {"walk_length": 15, "min_count": 5, "repeats": 5}


def _int_list(value: str) -> List[int]:
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{value}'")


def _float_list(value: str) -> List[float]:
    try:
        return [float(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{value}'")


def _load_documents(settings: Settings, path: Path, corpus_format: Optional[str]) -> List[DocumentRecord]:
    documents = CorpusLoader().load_corpus(path, corpus_format)
    return TextNormalizer(settings.pipeline_config()).normalize_documents(documents)


def _training_documents(documents: List[DocumentRecord]) -> List[DocumentRecord]:
    """Documents tagged train, or all of them when the corpus carries no tags"""
    if any(document.split is not None for document in documents):
        return [document for document in documents if document.split == "train"]
    return documents


def _test_documents(documents: List[DocumentRecord]) -> List[DocumentRecord]:
    if any(document.split is not None for document in documents):
        return [document for document in documents if document.split == "test"]
    return documents


def _walk_config(settings: Settings, documents: Sequence[DocumentRecord]) -> WalkConfig:
    return settings.walk_config().resolve(CorpusStats.from_documents(list(documents)).average_length)


def _experiment_spec(args: argparse.Namespace, settings: Settings) -> ExperimentSpec:
    walk_lengths = getattr(args, "walk_lengths", None) or [settings.walk_length]
    walks_per_node = getattr(args, "walks_per_node_grid", None) or [settings.walks_per_node]
    pipeline = settings.pipeline_config()
    train = settings.train_config()
    repeats = args.repeats or settings.repeats
    search = settings.hyperparameter_search
    if getattr(args, "full_scale", False):
        walk_lengths = [FULL_SCALE["walk_length"]]
        pipeline = pipeline.model_copy(update={"min_count": FULL_SCALE["min_count"]})
        repeats = FULL_SCALE["repeats"]
        search = True
        logger.info("Full-scale mode: m=15, min_count=5, 5 repeats, full hyperparameter grid")
    return ExperimentSpec(
        name=args.name or Path(args.corpus).stem,
        corpus_path=Path(args.corpus),
        corpus_format=args.format,
        split_mode=args.split_mode or settings.split_mode,
        test_fraction=settings.test_fraction,
        train_fraction=settings.train_fraction,
        walk_lengths=walk_lengths,
        walks_per_node=walks_per_node,
        pipeline=pipeline,
        train=train,
        repeats=repeats,
        vary_seeds=settings.vary_seeds,
        master_seed=settings.seed,
        threads=settings.threads,
        hyperparameter_search=search,
        degree_floor=settings.degree_floor,
        out_dir=settings.out_path,
    )


def _print_record(record) -> None:
    print(
        f"{record.name}\tm={record.walk_length}\tn={record.walks_per_node}\tf={record.train_fraction}\t"
        f"micro-F1={record.micro_f1_mean:.4f}±{record.micro_f1_sd:.4f}\t"
        f"macro-F1={record.macro_f1_mean:.4f}±{record.macro_f1_sd:.4f}"
    )


def cmd_ingest(args: argparse.Namespace, settings: Settings) -> int:
    documents = _load_documents(settings, args.corpus, args.format)
    stats = CorpusStats.from_documents(documents)
    print(f"documents\t{stats.documents}")
    print(f"classes\t{stats.classes}")
    print(f"average_length\t{stats.average_length:.2f}")
    print(f"empty_documents\t{stats.empty_documents}")
    for label, count in stats.label_counts.items():
        print(f"label\t{label}\t{count}")
    if args.output:
        write_corpus_jsonl(documents, args.output)
        print(f"wrote {args.output}")
    return 0


def cmd_build_graph(args: argparse.Namespace, settings: Settings) -> int:
    pipeline = settings.pipeline_config()
    documents = _training_documents(_load_documents(settings, args.corpus, args.format))
    vocabulary = build_vocabulary(documents, pipeline)
    graph = build_graph(documents, vocabulary, open_vocabulary=pipeline.open_vocabulary)
    output = args.output or settings.out_path / "graph.tsv"
    digest = ArtifactStore().save_graph(graph, output, pipeline.digest())
    print(f"nodes\t{graph.num_nodes}")
    print(f"edges\t{graph.num_edges}")
    print(f"pairs\t{graph.stats.pairs_processed}")
    print(f"oov_pairs_skipped\t{graph.stats.oov_pairs_skipped}")
    print(f"self_loops_skipped\t{graph.stats.self_loops_skipped}")
    print(f"digest\t{digest}")
    print(f"wrote {output}")
    return 0


def cmd_stats(args: argparse.Namespace, settings: Settings) -> int:
    graph = ArtifactStore().load_graph(args.graph)
    histogram = graph.degree_histogram(args.floor or settings.degree_floor)
    print(f"nodes\t{graph.num_nodes}")
    print(f"edges\t{graph.num_edges}")
    print(f"tail_floor\t{histogram.floor}")
    print(f"tail_slope\t{histogram.slope}")
    print(f"tail_r_squared\t{histogram.r_squared}")
    if args.output:
        FormatHelper.write_tsv(
            args.output,
            ["degree", "nodes"],
            histogram.bins,
            {"graph": graph_digest(graph), "floor": histogram.floor,
             "slope": histogram.slope, "r_squared": histogram.r_squared},
        )
        print(f"wrote {args.output}")
    return 0


def cmd_walk(args: argparse.Namespace, settings: Settings) -> int:
    graph = ArtifactStore().load_graph(args.graph)
    documents = _load_documents(settings, args.corpus, args.format)
    config = _walk_config(settings, _training_documents(documents))
    walks = WeightedWalker(graph, config).generate_walks()
    output = args.output or settings.out_path / "walks.txt"
    write_walk_dump(walks, output)
    print(f"wrote {sum(len(node_walks) for node_walks in walks.values())} walks to {output}")
    return 0


def cmd_embed(args: argparse.Namespace, settings: Settings) -> int:
    store = ArtifactStore()
    graph = store.load_graph(args.graph)
    documents = _load_documents(settings, args.corpus, args.format)
    config = _walk_config(settings, _training_documents(documents))
    matrix = DocumentEmbedder(graph, config).embed_corpus(
        documents, graph_digest=graph_digest(graph), config_digest=config.digest()
    )
    output = args.output or settings.out_path / "embeddings.tsv"
    digest = store.save_embeddings(matrix, output)
    print(f"documents\t{len(matrix.ids)}")
    print(f"dimension\t{matrix.dim}")
    print(f"empty_documents\t{len(matrix.empty_documents)}")
    print(f"digest\t{digest}")
    print(f"wrote {output}")
    return 0


def _labeled_rows(args: argparse.Namespace, settings: Settings, split: str):
    store = ArtifactStore()
    graph = store.load_graph(args.graph) if args.graph else None
    matrix = store.load_embeddings(args.embeddings, graph)
    documents = CorpusLoader().load_corpus(args.corpus, args.format)
    chosen = _training_documents(documents) if split == "train" else _test_documents(documents)
    ids = [document.id for document in chosen]
    return matrix, matrix.rows_for(ids), [document.label for document in chosen]


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    matrix, X, labels = _labeled_rows(args, settings, "train")
    config = settings.train_config()
    if settings.hyperparameter_search:
        model, log, _ = select_hyperparameters(X, labels, config)
    else:
        model, log = train_classifier(X, labels, config)
    model.embedding_source = matrix.source()
    output = args.output or settings.out_path / "model.bin"
    digest = ArtifactStore().save_model(model, output)
    print(f"best_epoch\t{log.best_epoch}")
    print(f"best_val_loss\t{log.best_val_loss:.6f}")
    print(f"val_micro_f1\t{log.val_micro_f1}")
    print(f"learning_rate\t{log.learning_rate}")
    print(f"dropout\t{log.dropout}")
    print(f"digest\t{digest}")
    print(f"wrote {output}")
    return 0


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    model = ArtifactStore().load_model(args.model)
    _, X, labels = _labeled_rows(args, settings, "test")
    predictions, _ = predict(model, X)
    report = evaluate(predictions, labels)
    print(format_report(report))
    if args.output:
        write_report_tsv(report, args.output, {"model": args.model, "embeddings": args.embeddings})
        print(f"wrote {args.output}")
    return 0


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    record = ExperimentRunner(_experiment_spec(args, settings)).run_experiment()
    _print_record(record)
    for phase, seconds in record.phase_seconds.items():
        print(f"time\t{phase}\t{seconds:.3f}s")
    return 0


def cmd_sweep(args: argparse.Namespace, settings: Settings) -> int:
    for record in ExperimentRunner(_experiment_spec(args, settings)).sweep():
        _print_record(record)
    return 0


def cmd_robustness(args: argparse.Namespace, settings: Settings) -> int:
    fractions = args.fractions or list(DEFAULT_FRACTIONS)
    for record in ExperimentRunner(_experiment_spec(args, settings)).robustness_curve(fractions):
        _print_record(record)
    return 0


def cmd_project(args: argparse.Namespace, settings: Settings) -> int:
    matrix = ArtifactStore().load_embeddings(args.embeddings)
    documents = CorpusLoader().load_corpus(args.corpus, args.format)
    labels: Dict[str, str] = {document.id: document.label for document in documents}
    result = export_projection(matrix, labels, args.output or settings.out_path, seed=settings.seed)
    if result.silhouette is not None:
        print(f"silhouette\t{result.silhouette:.4f}")
    for name, path in result.artifacts.items():
        print(f"wrote {name}\t{path}")
    return 0


def cmd_synth(args: argparse.Namespace, settings: Settings) -> int:
    config = SyntheticCorpusConfig(
        topics=args.topics,
        topic_vocabulary=args.topic_vocabulary,
        shared_vocabulary=args.shared_vocabulary,
        documents_per_topic=args.documents,
        seed=settings.seed,
    )
    documents = generate_corpus(config)
    write_corpus_jsonl(documents, args.output)
    print(f"wrote {len(documents)} documents to {args.output}")
    return 0


def cmd_serve(args: argparse.Namespace, settings: Settings) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port, reload=settings.debug, log_level="info")
    return 0


def _add_corpus_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", type=Path, required=True, help="Corpus file (.jsonl or .tsv)")
    parser.add_argument("--format", choices=["jsonl", "tsv"], help="Corpus format; inferred from the extension")


def _add_experiment_args(parser: argparse.ArgumentParser) -> None:
    _add_corpus_args(parser)
    parser.add_argument("--name", help="Experiment name (default: corpus file stem)")
    parser.add_argument("--split-mode", choices=["given-splits", "fraction"])
    parser.add_argument("--repeats", type=int, help="Repeats per configuration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gtpm", description="Guided transition probability matrix text embeddings")
    parser.add_argument("--config", help="Flat key=value settings file")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--out-dir", help="Directory for artifacts and tables")
    parser.add_argument("--threads", type=int, help="Walk generation threads")
    parser.add_argument("--log-level", default=None, help="Logging level (default from settings)")
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="Load and normalize a corpus, print its statistics")
    _add_corpus_args(ingest)
    ingest.add_argument("--output", type=Path, help="Write normalized records as JSON lines")
    ingest.set_defaults(handler=cmd_ingest)

    graph = commands.add_parser("build-graph", help="Build the word graph from the training documents")
    _add_corpus_args(graph)
    graph.add_argument("--output", type=Path)
    graph.set_defaults(handler=cmd_build_graph)

    stats = commands.add_parser("stats", help="Degree histogram and power-law tail fit of a graph")
    stats.add_argument("--graph", type=Path, required=True)
    stats.add_argument("--floor", type=int, help="Lowest degree in the tail fit")
    stats.add_argument("--output", type=Path, help="Write the histogram TSV")
    stats.set_defaults(handler=cmd_stats)

    walk = commands.add_parser("walk", help="Dump weighted random walks of every node")
    _add_corpus_args(walk)
    walk.add_argument("--graph", type=Path, required=True)
    walk.add_argument("--output", type=Path)
    walk.set_defaults(handler=cmd_walk)

    embed = commands.add_parser("embed", help="Embed every corpus document against a graph")
    _add_corpus_args(embed)
    embed.add_argument("--graph", type=Path, required=True)
    embed.add_argument("--output", type=Path)
    embed.set_defaults(handler=cmd_embed)

    train = commands.add_parser("train", help="Train the classifier on the training documents' embeddings")
    _add_corpus_args(train)
    train.add_argument("--embeddings", type=Path, required=True)
    train.add_argument("--graph", type=Path, help="Verify the embeddings were computed from this graph")
    train.add_argument("--output", type=Path)
    train.set_defaults(handler=cmd_train)

    evaluate_cmd = commands.add_parser("eval", help="Micro/Macro-F1 of a model on the test documents")
    _add_corpus_args(evaluate_cmd)
    evaluate_cmd.add_argument("--model", type=Path, required=True)
    evaluate_cmd.add_argument("--embeddings", type=Path, required=True)
    evaluate_cmd.add_argument("--graph", type=Path, help="Verify the embeddings were computed from this graph")
    evaluate_cmd.add_argument("--output", type=Path, help="Write the report TSV")
    evaluate_cmd.set_defaults(handler=cmd_eval)

    run = commands.add_parser("run", help="End-to-end experiment with repeats")
    _add_experiment_args(run)
    run.add_argument("--full-scale", action="store_true", help="Published settings and the full hyperparameter grid")
    run.set_defaults(handler=cmd_run)

    sweep = commands.add_parser("sweep", help="Grid over walk lengths and walks per node")
    _add_experiment_args(sweep)
    sweep.add_argument("--walk-lengths", type=_int_list, help="e.g. 5,15,25")
    sweep.add_argument("--walks-per-node", dest="walks_per_node_grid", type=_int_list, help="e.g. 1,2,4")
    sweep.set_defaults(handler=cmd_sweep)

    robustness = commands.add_parser("robustness", help="Scores as the labeled training share shrinks")
    _add_experiment_args(robustness)
    robustness.add_argument("--fractions", type=_float_list, help="Descending, e.g. 0.1,0.08,0.06")
    robustness.set_defaults(handler=cmd_robustness)

    project = commands.add_parser("project", help="2D PCA projection and raw export of embeddings")
    _add_corpus_args(project)
    project.add_argument("--embeddings", type=Path, required=True)
    project.add_argument("--output", type=Path, help="Output directory")
    project.set_defaults(handler=cmd_project)

    synth = commands.add_parser("synth", help="Generate a synthetic Zipfian multi-topic corpus")
    synth.add_argument("--output", type=Path, required=True)
    synth.add_argument("--topics", type=int, default=2)
    synth.add_argument("--topic-vocabulary", type=int, default=200)
    synth.add_argument("--shared-vocabulary", type=int, default=100)
    synth.add_argument("--documents", type=int, default=500, help="Documents per topic")
    synth.set_defaults(handler=cmd_synth)

    serve = commands.add_parser("serve", help="Run the HTTP service")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(handler=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config and not Path(args.config).is_file():
        print(f"error [config]: settings file '{args.config}' does not exist", file=sys.stderr)
        return 2

    try:
        settings = load_settings(args.config, seed=args.seed, out_dir=args.out_dir, threads=args.threads)
    except ValidationError as e:
        print(f"error [config]: {e}", file=sys.stderr)
        return 2
    setup_logging(args.log_level or settings.log_level)

    try:
        return args.handler(args, settings)
    except ValidationError as e:
        print(f"error [config]: {e}", file=sys.stderr)
        return 2
    except GTPMException as e:
        print(f"error [{e.phase or 'pipeline'}]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
