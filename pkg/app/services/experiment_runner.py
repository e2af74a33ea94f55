import itertools
import logging
import time
from collections import defaultdict
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from app.core.exceptions import ExperimentError
from app.models.config_models import ExperimentSpec, WalkConfig
from app.models.corpus_models import CorpusStats, DocumentRecord, Vocabulary
from app.models.report_models import EvalReport, ProjectionPoint, RunRecord, TrainingLog
from app.services.classifier import predict, select_hyperparameters, train_classifier
from app.services.corpus_loader import CorpusLoader
from app.services.embedding import DocumentEmbedder, EmbeddingMatrix
from app.services.metrics import evaluate, write_report_tsv
from app.services.persistence import ArtifactStore, graph_digest
from app.services.projection import project_2d, silhouette_score, write_projection_tsv, write_raw_tsv
from app.services.text_normalizer import TextNormalizer, build_vocabulary
from app.services.word_graph import WordGraph, build_graph
from app.utils.format_helpers import FormatHelper
from app.utils.seeding import REPEAT_STREAM, SPLIT_STREAM, SUBSAMPLE_STREAM, SeedHelper

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS: Tuple[float, ...] = (0.10, 0.08, 0.06, 0.04, 0.02)


class RepeatResult(BaseModel):
    seed: int
    report: EvalReport
    training: TrainingLog
    empty_test_documents: int
    artifacts: Dict[str, str]


class ProjectionResult(BaseModel):
    points: List[ProjectionPoint]
    silhouette: Optional[float] = None
    artifacts: Dict[str, str]


def _mean_sd(values: Sequence[float]) -> Tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    sd = float(array.std(ddof=1)) if len(array) > 1 else 0.0
    return float(array.mean()), sd


class ExperimentRunner:
    """Orchestrate normalize -> vocabulary -> graph -> walks -> embeddings -> train -> evaluate"""

    def __init__(self, spec: ExperimentSpec, documents: Optional[List[DocumentRecord]] = None):
        self.spec = spec
        self.loader = CorpusLoader()
        self.normalizer = TextNormalizer(spec.pipeline)
        self.store = ArtifactStore()
        self._documents = documents
        self._normalized = False
        self._timings: Dict[str, float] = defaultdict(float)

    @contextmanager
    def _phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self._timings[name] += time.perf_counter() - start

    def documents(self) -> List[DocumentRecord]:
        """Corpus records, normalized once and cached"""
        if self._documents is None:
            if self.spec.corpus_path is None:
                raise ExperimentError("ingest", "Experiment has neither a corpus path nor in-memory documents")
            self._documents = self.loader.load_corpus(self.spec.corpus_path, self.spec.corpus_format)
        if not self._normalized:
            with self._phase("normalize"):
                self._documents = self.normalizer.normalize_documents(self._documents)
            self._normalized = True
        return self._documents

    def split(self, documents: List[DocumentRecord]) -> Tuple[List[DocumentRecord], List[DocumentRecord]]:
        """
        Train/test partition, fixed by the master seed

        given-splits uses each record's split tag; fraction holds out
        round(test_fraction * n_c) documents of every class, keeping at least
        one per class for training.
        """
        if self.spec.split_mode == "given-splits":
            untagged = [document.id for document in documents if document.split is None]
            if untagged:
                raise ExperimentError(
                    "ingest", f"{len(untagged)} documents carry no split tag (e.g. {untagged[:3]})"
                )
            train = [document for document in documents if document.split == "train"]
            test = [document for document in documents if document.split == "test"]
        else:
            rng = SeedHelper.rng(self.spec.master_seed, SPLIT_STREAM)
            by_label: Dict[str, List[int]] = defaultdict(list)
            for index, document in enumerate(documents):
                by_label[document.label].append(index)
            held_out = set()
            for label in sorted(by_label):
                members = np.asarray(by_label[label])[rng.permutation(len(by_label[label]))]
                take = min(int(round(self.spec.test_fraction * len(members))), len(members) - 1)
                held_out.update(members[:take].tolist())
            train = [document for index, document in enumerate(documents) if index not in held_out]
            test = [document for index, document in enumerate(documents) if index in held_out]

        if not train or not test:
            raise ExperimentError("ingest", f"Split left {len(train)} train and {len(test)} test documents")
        logger.info(f"Split {len(documents)} documents into {len(train)} train / {len(test)} test")
        return train, test

    def subsample(self, train: List[DocumentRecord], fraction: float) -> List[DocumentRecord]:
        """
        Stratified seeded subsample keeping max(1, round(fraction * n_c)) per class

        One permutation per class is drawn from the master seed, so smaller
        fractions are nested inside larger ones. fraction >= 1 returns the
        input unchanged.
        """
        if fraction >= 1.0:
            return train
        rng = SeedHelper.rng(self.spec.master_seed, SUBSAMPLE_STREAM)
        by_label: Dict[str, List[int]] = defaultdict(list)
        for index, document in enumerate(train):
            by_label[document.label].append(index)
        kept = set()
        for label in sorted(by_label):
            members = np.asarray(by_label[label])[rng.permutation(len(by_label[label]))]
            keep = max(1, int(round(fraction * len(members))))
            kept.update(members[:keep].tolist())
        subset = [document for index, document in enumerate(train) if index in kept]
        logger.info(f"Subsampled {len(subset)} of {len(train)} training documents (fraction={fraction})")
        return subset

    def prepare_graph(self, train: List[DocumentRecord]) -> Tuple[Vocabulary, WordGraph]:
        """Vocabulary and word graph from the training documents only"""
        with self._phase("vocabulary"):
            vocabulary = build_vocabulary(train, self.spec.pipeline)
        with self._phase("graph"):
            graph = build_graph(train, vocabulary, open_vocabulary=self.spec.pipeline.open_vocabulary)
            graph.config_digest = self.spec.pipeline.digest()
            graph.freeze()
        return vocabulary, graph

    def repeat_seeds(self) -> List[int]:
        if not self.spec.vary_seeds:
            return [self.spec.master_seed] * self.spec.repeats
        return [SeedHelper.derive_seed(self.spec.master_seed, REPEAT_STREAM, r) for r in range(self.spec.repeats)]

    def _resolve_walks(self, walk_length: int, walks_per_node: Optional[int], seed: int, train: List[DocumentRecord]) -> WalkConfig:
        config = self.spec.walk_config(walk_length, walks_per_node, seed)
        return config.resolve(CorpusStats.from_documents(train).average_length)

    def _run_repeat(
        self,
        train: List[DocumentRecord],
        test: List[DocumentRecord],
        graph: WordGraph,
        digest: str,
        walk_config: WalkConfig,
        out_dir: Optional[Path],
    ) -> RepeatResult:
        seed = walk_config.master_seed
        embedder = DocumentEmbedder(graph, walk_config)
        with self._phase("walks"):
            _ = embedder.node_embeddings
        with self._phase("embeddings"):
            matrix = embedder.embed_corpus(train + test, graph_digest=digest, config_digest=walk_config.digest())
        X_train = matrix.rows_for([document.id for document in train])
        X_test = matrix.rows_for([document.id for document in test])
        train_labels = [document.label for document in train]
        test_labels = [document.label for document in test]

        train_config = self.spec.train.model_copy(update={"seed": seed})
        with self._phase("train"):
            if self.spec.hyperparameter_search:
                model, training, _ = select_hyperparameters(X_train, train_labels, train_config)
            else:
                model, training = train_classifier(X_train, train_labels, train_config)
            model.embedding_source = matrix.source()
        with self._phase("evaluate"):
            predictions, _ = predict(model, X_test)
            report = evaluate(predictions, test_labels)

        test_ids = {document.id for document in test}
        artifacts: Dict[str, str] = {}
        if out_dir is not None:
            with self._phase("artifacts"):
                artifacts = self._write_repeat_artifacts(matrix, model, report, out_dir)
        return RepeatResult(
            seed=seed,
            report=report,
            training=training,
            empty_test_documents=sum(1 for doc_id in matrix.empty_documents if doc_id in test_ids),
            artifacts=artifacts,
        )

    def _write_repeat_artifacts(self, matrix: EmbeddingMatrix, model, report: EvalReport, out_dir: Path) -> Dict[str, str]:
        paths = {
            "embeddings": out_dir / "embeddings.tsv",
            "model": out_dir / "model.bin",
            "report": out_dir / "report.json",
            "report_tsv": out_dir / "report.tsv",
        }
        self.store.save_embeddings(matrix, paths["embeddings"])
        self.store.save_model(model, paths["model"])
        self.store.save_report(report, paths["report"], self.spec.pipeline.digest())
        write_report_tsv(report, paths["report_tsv"], self.spec.summary())
        return {key: str(path) for key, path in paths.items()}

    def _run_point(
        self,
        train: List[DocumentRecord],
        test: List[DocumentRecord],
        vocabulary: Vocabulary,
        graph: WordGraph,
        walk_length: int,
        walks_per_node: Optional[int],
        fraction: float,
        run_dir: Optional[Path],
    ) -> RunRecord:
        digest = graph_digest(graph)
        results: List[RepeatResult] = []
        walk_config = None
        for repeat, seed in enumerate(self.repeat_seeds()):
            walk_config = self._resolve_walks(walk_length, walks_per_node, seed, train)
            repeat_dir = None
            if run_dir is not None:
                repeat_dir = run_dir / f"m{walk_length}_n{walk_config.walks_per_node}" / f"repeat{repeat}"
            results.append(self._run_repeat(train, test, graph, digest, walk_config, repeat_dir))
            logger.info(
                f"[{self.spec.name}] m={walk_length} n={walk_config.walks_per_node} f={fraction} repeat {repeat}: "
                f"micro-F1={results[-1].report.micro_f1:.4f}"
            )

        micro = [result.report.micro_f1 for result in results]
        macro = [result.report.macro_f1 for result in results]
        micro_mean, micro_sd = _mean_sd(micro)
        macro_mean, macro_sd = _mean_sd(macro)
        train_labels = {document.label for document in train}
        dropped = sorted({document.label for document in test} - train_labels)
        if dropped:
            logger.warning(f"Classes {dropped} have no training documents; they cannot be predicted")

        artifacts = {}
        for repeat, result in enumerate(results):
            artifacts.update({f"repeat{repeat}.{key}": path for key, path in result.artifacts.items()})
        return RunRecord(
            name=self.spec.name,
            walk_length=walk_length,
            walks_per_node=walk_config.walks_per_node,
            train_fraction=fraction,
            repeats=len(results),
            seeds=[result.seed for result in results],
            micro_f1_runs=micro,
            macro_f1_runs=macro,
            micro_f1_mean=micro_mean,
            micro_f1_sd=micro_sd,
            macro_f1_mean=macro_mean,
            macro_f1_sd=macro_sd,
            phase_seconds=dict(self._timings),
            vocabulary_size=len(vocabulary),
            edges=graph.num_edges,
            test_oov_rate=vocabulary.oov_rate(test),
            train_documents=len(train),
            test_documents=len(test),
            empty_test_documents=results[-1].empty_test_documents,
            dropped_classes=dropped,
            learning_rate=results[-1].training.learning_rate,
            dropout=results[-1].training.dropout,
            artifacts=artifacts,
        )

    def _run_dir(self, *parts: str) -> Optional[Path]:
        if self.spec.out_dir is None:
            return None
        return Path(self.spec.out_dir).joinpath(self.spec.name, *parts)

    def _prepare_fraction(
        self, fraction: float, run_dir: Optional[Path]
    ) -> Tuple[List[DocumentRecord], List[DocumentRecord], Vocabulary, WordGraph]:
        train, test = self.split(self.documents())
        train = self.subsample(train, fraction)
        vocabulary, graph = self.prepare_graph(train)
        if run_dir is not None:
            self.store.save_graph(graph, run_dir / "graph.tsv")
        return train, test, vocabulary, graph

    def run_experiment(self) -> RunRecord:
        """One end-to-end run at the first grid point, repeated R times"""
        self._timings.clear()
        run_dir = self._run_dir()
        train, test, vocabulary, graph = self._prepare_fraction(self.spec.train_fraction, run_dir)
        record = self._run_point(
            train, test, vocabulary, graph,
            self.spec.walk_lengths[0], self.spec.walks_per_node[0], self.spec.train_fraction, run_dir,
        )
        logger.info(
            f"[{self.spec.name}] micro-F1 {record.micro_f1_mean:.4f} +/- {record.micro_f1_sd:.4f}, "
            f"macro-F1 {record.macro_f1_mean:.4f} +/- {record.macro_f1_sd:.4f}"
        )
        return record

    def sweep(self) -> List[RunRecord]:
        """One record per (m, n) grid point; the graph is built once and reused"""
        run_dir = self._run_dir()
        self._timings.clear()
        train, test, vocabulary, graph = self._prepare_fraction(self.spec.train_fraction, run_dir)
        records = []
        for walk_length, walks_per_node in itertools.product(self.spec.walk_lengths, self.spec.walks_per_node):
            self._timings.clear()
            records.append(self._run_point(
                train, test, vocabulary, graph, walk_length, walks_per_node, self.spec.train_fraction, run_dir,
            ))
        if run_dir is not None:
            FormatHelper.write_tsv(
                run_dir / "sweep.tsv",
                ["m", "n", "micro_f1_mean", "micro_f1_sd", "macro_f1_mean", "macro_f1_sd", "seconds"],
                [
                    [r.walk_length, r.walks_per_node, r.micro_f1_mean, r.micro_f1_sd,
                     r.macro_f1_mean, r.macro_f1_sd, sum(r.phase_seconds.values())]
                    for r in records
                ],
                self.spec.summary(),
            )
        return records

    def robustness_curve(self, fractions: Sequence[float] = DEFAULT_FRACTIONS) -> List[RunRecord]:
        """
        Micro/Macro-F1 as the labeled training share shrinks

        Each fraction subsamples the training split, rebuilds vocabulary and
        graph from the subsample alone, and evaluates on the full test split.
        """
        fractions = list(fractions)
        if not fractions or any(not 0.0 < f <= 1.0 for f in fractions):
            raise ExperimentError("ingest", f"Fractions must lie in (0, 1], got {fractions}")
        if fractions != sorted(fractions, reverse=True):
            raise ExperimentError("ingest", f"Fractions must be sorted in descending order, got {fractions}")

        records = []
        for fraction in fractions:
            self._timings.clear()
            run_dir = self._run_dir(f"f{fraction:g}")
            train, test, vocabulary, graph = self._prepare_fraction(fraction, run_dir)
            records.append(self._run_point(
                train, test, vocabulary, graph,
                self.spec.walk_lengths[0], self.spec.walks_per_node[0], fraction, run_dir,
            ))
        curve_dir = self._run_dir()
        if curve_dir is not None:
            FormatHelper.write_tsv(
                curve_dir / "robustness.tsv",
                ["fraction", "train_documents", "vocabulary", "test_oov_rate",
                 "micro_f1_mean", "micro_f1_sd", "macro_f1_mean", "macro_f1_sd", "dropped_classes"],
                [
                    [r.train_fraction, r.train_documents, r.vocabulary_size, r.test_oov_rate,
                     r.micro_f1_mean, r.micro_f1_sd, r.macro_f1_mean, r.macro_f1_sd,
                     ",".join(r.dropped_classes) or "-"]
                    for r in records
                ],
                self.spec.summary(),
            )
        return records


def export_projection(
    matrix: EmbeddingMatrix,
    labels: Dict[str, str],
    out_dir: Optional[Path] = None,
    seed: int = 0,
) -> ProjectionResult:
    """2D PCA projection with silhouette, plus plot-ready and raw TSV exports"""
    missing = [doc_id for doc_id in matrix.ids if doc_id not in labels]
    if missing:
        raise ExperimentError("project", f"No label for documents {missing[:5]}")
    ordered_labels = [labels[doc_id] for doc_id in matrix.ids]
    points = project_2d(matrix.vectors, ordered_labels, matrix.ids, seed=seed)

    silhouette = None
    if len(set(ordered_labels)) >= 2:
        silhouette = silhouette_score(np.array([[p.x, p.y] for p in points]), ordered_labels)
        logger.info(f"2D silhouette score: {silhouette:.4f}")

    artifacts = {}
    if out_dir is not None:
        config = {"m": matrix.walk_length, "n": matrix.walks_per_node, "seed": matrix.seed,
                  "graph": matrix.graph_digest or "-", "silhouette": silhouette}
        artifacts["projection"] = str(write_projection_tsv(points, Path(out_dir) / "projection.tsv", config))
        artifacts["raw"] = str(write_raw_tsv(matrix.ids, matrix.vectors, ordered_labels, Path(out_dir) / "raw.tsv", config))
    return ProjectionResult(points=points, silhouette=silhouette, artifacts=artifacts)


def run_experiment(spec: ExperimentSpec, documents: Optional[List[DocumentRecord]] = None) -> RunRecord:
    return ExperimentRunner(spec, documents).run_experiment()


def sweep(spec: ExperimentSpec, documents: Optional[List[DocumentRecord]] = None) -> List[RunRecord]:
    return ExperimentRunner(spec, documents).sweep()


def robustness_curve(
    spec: ExperimentSpec,
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    documents: Optional[List[DocumentRecord]] = None,
) -> List[RunRecord]:
    return ExperimentRunner(spec, documents).robustness_curve(fractions)
