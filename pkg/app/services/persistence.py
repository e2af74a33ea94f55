"""
Versioned on-disk formats for graphs, embeddings, models and reports.

Graphs and embeddings are UTF-8 text (one header line, then tab-separated
rows); models are a little-endian binary container. Every file carries a
blake2b-64 digest of its body, and saving a loaded artifact reproduces the
original bytes.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
from urllib.parse import quote, unquote

import numpy as np

from app.core.exceptions import (
    ArtifactChainError,
    ArtifactDigestError,
    ArtifactError,
    ArtifactTruncatedError,
    ArtifactVersionError,
)
from app.models.config_models import EmbeddingSource, TrainConfig
from app.models.corpus_models import Vocabulary
from app.models.report_models import ArtifactHeader, EvalReport
from app.services.classifier import MLPModel
from app.services.embedding import EmbeddingMatrix
from app.services.word_graph import WordGraph
from app.utils.file_helpers import FileHelper
from app.utils.format_helpers import FormatHelper

logger = logging.getLogger(__name__)

FORMAT_VERSIONS: Dict[str, int] = {
    "graph": 1,
    "embeddings": 1,
    "model": 1,
    "report": 1,
}

MODEL_MAGIC = b"GTPMMODL"
Artifact = Union[WordGraph, EmbeddingMatrix, MLPModel, EvalReport]


def _header_line(kind: str, params: Dict[str, Any]) -> str:
    fields = " ".join(f"{key}={value}" for key, value in params.items())
    return f"#gtpm-{kind} v{FORMAT_VERSIONS[kind]} {fields}"


def _parse_header(line: str, kind: str) -> ArtifactHeader:
    parts = line.split()
    expected = f"#gtpm-{kind}"
    if not parts or parts[0] != expected:
        found = parts[0] if parts else "<empty>"
        raise ArtifactVersionError(f"Expected a {expected} file, found '{found}'")
    if len(parts) < 2 or not parts[1].startswith("v") or not parts[1][1:].isdigit():
        raise ArtifactTruncatedError(f"Malformed {kind} header: '{line}'")
    version = int(parts[1][1:])
    if version != FORMAT_VERSIONS[kind]:
        raise ArtifactVersionError(
            f"Unsupported {kind} format version {version}; this build reads v{FORMAT_VERSIONS[kind]}"
        )
    params = {}
    for part in parts[2:]:
        key, sep, value = part.partition("=")
        if not sep:
            raise ArtifactTruncatedError(f"Malformed {kind} header field '{part}'")
        params[key] = value
    return ArtifactHeader(
        format=kind,
        version=version,
        config_digest=params.pop("config", ""),
        digest=params.pop("digest", ""),
        params=params,
    )


def _split_text_artifact(path: Path, kind: str) -> Tuple[ArtifactHeader, str]:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"Artifact '{path}' does not exist")
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as e:
        raise ArtifactTruncatedError(f"{kind} file '{path}' is not UTF-8 text: {str(e)}")
    if not text.endswith("\n"):
        raise ArtifactTruncatedError(f"{kind} file '{path}' ends mid-line")
    header_line, _, body = text.partition("\n")
    header = _parse_header(header_line, kind)
    actual = FormatHelper.digest_bytes(body.encode("utf-8"))
    if header.digest != actual:
        raise ArtifactDigestError(f"{kind} file '{path}' digest {header.digest} does not match contents ({actual})")
    return header, body


def _graph_body(graph: WordGraph) -> str:
    vocabulary = graph.vocabulary
    lines = [
        f"#node\t{node}\t{vocabulary.id_to_word[node]}\t{vocabulary.frequencies[node]}"
        for node in range(graph.num_nodes)
    ]
    edges = []
    for i, j, count in graph.edges():
        a, b = sorted((vocabulary.id_to_word[i], vocabulary.id_to_word[j]))
        edges.append((a, b, count))
    lines.extend(f"{a}\t{b}\t{count}" for a, b, count in sorted(edges))
    return "".join(line + "\n" for line in lines)


def graph_digest(graph: WordGraph) -> str:
    """Digest of the graph's canonical text form; chains embeddings to their graph"""
    return FormatHelper.digest_bytes(_graph_body(graph).encode("utf-8"))


def _embeddings_body(matrix: EmbeddingMatrix) -> str:
    lines = ["\t".join(["id"] + [f"v{index}" for index in range(matrix.dim)])]
    for doc_id, row in zip(matrix.ids, matrix.vectors):
        lines.append("\t".join([doc_id] + [FormatHelper.format_float(value) for value in row.tolist()]))
    return "".join(line + "\n" for line in lines)


def _encode_ids(ids: List[str]) -> str:
    """Comma-joined, percent-encoded ids for a header field"""
    return ",".join(quote(doc_id, safe="") for doc_id in ids)


def _decode_ids(value: str) -> List[str]:
    return [] if not value else [unquote(part) for part in value.split(",")]


class ArtifactStore:
    """Save and load pipeline artifacts; owns the format version registry"""

    def save_graph(self, graph: WordGraph, path: Path, config_digest: str = "") -> str:
        config_digest = config_digest or graph.config_digest
        body = _graph_body(graph)
        digest = FormatHelper.digest_bytes(body.encode("utf-8"))
        header = _header_line("graph", {
            "nodes": graph.num_nodes,
            "edges": graph.num_edges,
            "digest": digest,
            "config": config_digest or "-",
        })
        self._write_text(path, header + "\n" + body)
        logger.info(f"Saved graph ({graph.num_nodes} nodes, {graph.num_edges} edges) to {path}")
        return digest

    def load_graph(self, path: Path) -> WordGraph:
        header, body = _split_text_artifact(path, "graph")
        words: List[str] = []
        frequencies: List[int] = []
        edges: List[Tuple[str, str, int]] = []
        try:
            for line in body.splitlines():
                parts = line.split("\t")
                if parts[0] == "#node":
                    if int(parts[1]) != len(words):
                        raise ArtifactTruncatedError(f"Node ids out of order at node {parts[1]}")
                    words.append(parts[2])
                    frequencies.append(int(parts[3]))
                else:
                    edges.append((parts[0], parts[1], int(parts[2])))
        except (IndexError, ValueError) as e:
            raise ArtifactTruncatedError(f"Malformed graph line in '{path}': {str(e)}")

        if int(header.params.get("nodes", -1)) != len(words) or int(header.params.get("edges", -1)) != len(edges):
            raise ArtifactTruncatedError(
                f"Graph '{path}' declares {header.params.get('nodes')} nodes / {header.params.get('edges')} edges, "
                f"found {len(words)} / {len(edges)}"
            )

        vocabulary = Vocabulary(
            word_to_id={word: node for node, word in enumerate(words)},
            id_to_word=words,
            frequencies=frequencies,
        )
        graph = WordGraph(vocabulary)
        for a, b, count in edges:
            if a not in vocabulary or b not in vocabulary:
                raise ArtifactTruncatedError(f"Edge ({a}, {b}) in '{path}' names an undeclared node")
            graph.add_pair(vocabulary.word_to_id[a], vocabulary.word_to_id[b], count)
        graph.config_digest = "" if header.config_digest == "-" else header.config_digest
        return graph.freeze()

    def save_embeddings(self, matrix: EmbeddingMatrix, path: Path) -> str:
        body = _embeddings_body(matrix)
        digest = FormatHelper.digest_bytes(body.encode("utf-8"))
        header = _header_line("embeddings", {
            "docs": len(matrix.ids),
            "dim": matrix.dim,
            "m": matrix.walk_length,
            "n": matrix.walks_per_node,
            "seed": matrix.seed,
            "graph": matrix.graph_digest or "-",
            "empty": _encode_ids(matrix.empty_documents),
            "digest": digest,
            "config": matrix.config_digest or "-",
        })
        self._write_text(path, header + "\n" + body)
        logger.info(f"Saved {len(matrix.ids)} embeddings to {path}")
        return digest

    def load_embeddings(self, path: Path, graph: Optional[WordGraph] = None) -> EmbeddingMatrix:
        """Load embeddings; with `graph`, also verify they were computed from it"""
        header, body = _split_text_artifact(path, "embeddings")
        lines = body.splitlines()
        if not lines:
            raise ArtifactTruncatedError(f"Embeddings file '{path}' has no column header")
        dim = int(header.params.get("dim", -1))
        ids: List[str] = []
        rows: List[List[float]] = []
        try:
            for line in lines[1:]:
                parts = line.split("\t")
                if len(parts) != dim + 1:
                    raise ArtifactTruncatedError(f"Row for '{parts[0]}' has {len(parts) - 1} values, expected {dim}")
                ids.append(parts[0])
                rows.append([float(value) for value in parts[1:]])
        except ValueError as e:
            raise ArtifactTruncatedError(f"Malformed embedding value in '{path}': {str(e)}")
        if int(header.params.get("docs", -1)) != len(ids):
            raise ArtifactTruncatedError(f"Embeddings '{path}' declare {header.params.get('docs')} rows, found {len(ids)}")

        stored_graph = header.params.get("graph", "-")
        matrix = EmbeddingMatrix(
            ids=ids,
            vectors=np.asarray(rows, dtype=np.float64).reshape(len(ids), dim),
            walk_length=int(header.params["m"]),
            walks_per_node=int(header.params["n"]),
            seed=int(header.params["seed"]),
            graph_digest="" if stored_graph == "-" else stored_graph,
            config_digest="" if header.config_digest == "-" else header.config_digest,
            empty_documents=_decode_ids(header.params.get("empty", "")),
        )
        if graph is not None:
            self.check_chain(matrix, graph)
        return matrix

    @staticmethod
    def check_chain(matrix: EmbeddingMatrix, graph: WordGraph) -> None:
        expected = graph_digest(graph)
        if matrix.graph_digest != expected:
            raise ArtifactChainError(
                f"Embeddings were computed from graph {matrix.graph_digest or '<unknown>'}, not {expected}"
            )

    def save_model(self, model: MLPModel, path: Path) -> str:
        arrays = self._model_arrays(model)
        payload = b"".join(np.ascontiguousarray(array, dtype="<f8").tobytes() for array in arrays)
        digest = FormatHelper.digest_bytes(payload)
        header = {
            "format": "model",
            "version": FORMAT_VERSIONS["model"],
            "layer_sizes": model.layer_sizes,
            "hidden_activation": "relu",
            "output_activation": model.output_activation,
            "classes": model.classes,
            "standardized": model.feature_mean is not None,
            "train_config": model.train_config.model_dump(mode="json"),
            "embedding_source": model.embedding_source.model_dump() if model.embedding_source else None,
            "digest": digest,
        }
        encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        blob = MODEL_MAGIC + struct.pack("<II", FORMAT_VERSIONS["model"], len(encoded)) + encoded + payload
        self._write_bytes(path, blob)
        logger.info(f"Saved model {model.layer_sizes} to {path}")
        return digest

    def load_model(self, path: Path) -> MLPModel:
        path = Path(path)
        if not path.is_file():
            raise ArtifactError(f"Artifact '{path}' does not exist")
        blob = path.read_bytes()
        prefix = len(MODEL_MAGIC) + 8
        if blob[:len(MODEL_MAGIC)] != MODEL_MAGIC:
            raise ArtifactVersionError(f"'{path}' is not a model file")
        if len(blob) < prefix:
            raise ArtifactTruncatedError(f"Model file '{path}' ends inside its header")
        version, header_length = struct.unpack("<II", blob[len(MODEL_MAGIC):prefix])
        if version != FORMAT_VERSIONS["model"]:
            raise ArtifactVersionError(
                f"Unsupported model format version {version}; this build reads v{FORMAT_VERSIONS['model']}"
            )
        if len(blob) < prefix + header_length:
            raise ArtifactTruncatedError(f"Model file '{path}' ends inside its header")
        try:
            header = json.loads(blob[prefix:prefix + header_length].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ArtifactTruncatedError(f"Unreadable model header in '{path}': {str(e)}")

        payload = blob[prefix + header_length:]
        sizes = header["layer_sizes"]
        shapes = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            shapes.extend([(fan_in, fan_out), (fan_out,)])
        if header["standardized"]:
            shapes.extend([(sizes[0],), (sizes[0],)])
        expected_bytes = 8 * sum(int(np.prod(shape)) for shape in shapes)
        if len(payload) != expected_bytes:
            raise ArtifactTruncatedError(f"Model '{path}' holds {len(payload)} parameter bytes, expected {expected_bytes}")
        actual = FormatHelper.digest_bytes(payload)
        if actual != header["digest"]:
            raise ArtifactDigestError(f"Model file '{path}' digest {header['digest']} does not match contents ({actual})")

        arrays = []
        offset = 0
        for shape in shapes:
            count = int(np.prod(shape))
            arrays.append(np.frombuffer(payload, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shape))
            offset += 8 * count
        layers = len(sizes) - 1
        weights = arrays[0:2 * layers:2]
        biases = arrays[1:2 * layers:2]
        mean = scale = None
        if header["standardized"]:
            mean, scale = arrays[2 * layers], arrays[2 * layers + 1]
        source = header.get("embedding_source")
        return MLPModel(
            weights=weights,
            biases=biases,
            classes=header["classes"],
            feature_mean=mean,
            feature_scale=scale,
            train_config=TrainConfig(**header["train_config"]),
            embedding_source=EmbeddingSource(**source) if source else None,
        )

    @staticmethod
    def _model_arrays(model: MLPModel) -> List[np.ndarray]:
        arrays = list(model.parameters)
        if model.feature_mean is not None:
            arrays.extend([model.feature_mean, model.feature_scale])
        return arrays

    def save_report(self, report: EvalReport, path: Path, config_digest: str = "") -> str:
        body = json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=1) + "\n"
        digest = FormatHelper.digest_bytes(body.encode("utf-8"))
        header = _header_line("report", {"digest": digest, "config": config_digest or "-"})
        self._write_text(path, header + "\n" + body)
        return digest

    def load_report(self, path: Path) -> EvalReport:
        _, body = _split_text_artifact(path, "report")
        try:
            return EvalReport.model_validate_json(body)
        except ValueError as e:
            raise ArtifactTruncatedError(f"Unreadable report '{path}': {str(e)}")

    def save_artifact(self, artifact: Artifact, path: Path) -> str:
        """Save any artifact type; returns its content digest"""
        if isinstance(artifact, WordGraph):
            return self.save_graph(artifact, path)
        if isinstance(artifact, EmbeddingMatrix):
            return self.save_embeddings(artifact, path)
        if isinstance(artifact, MLPModel):
            return self.save_model(artifact, path)
        if isinstance(artifact, EvalReport):
            return self.save_report(artifact, path)
        raise ArtifactError(f"No artifact format for {type(artifact).__name__}")

    def load_artifact(self, path: Path) -> Artifact:
        """Load an artifact, dispatching on the format tag at the start of the file"""
        path = Path(path)
        if not path.is_file():
            raise ArtifactError(f"Artifact '{path}' does not exist")
        with path.open("rb") as handle:
            start = handle.read(32)
        if start.startswith(MODEL_MAGIC):
            return self.load_model(path)
        for kind, loader in (("graph", self.load_graph), ("embeddings", self.load_embeddings), ("report", self.load_report)):
            if start.startswith(f"#gtpm-{kind} ".encode("utf-8")):
                return loader(path)
        raise ArtifactVersionError(f"'{path}' does not start with a known artifact tag")

    @staticmethod
    def _write_text(path: Path, text: str) -> None:
        ArtifactStore._write_bytes(path, text.encode("utf-8"))

    @staticmethod
    def _write_bytes(path: Path, payload: bytes) -> None:
        path = Path(path)
        FileHelper.ensure_dir(path.parent)
        path.write_bytes(payload)


def save_artifact(artifact: Artifact, path: Path) -> str:
    return ArtifactStore().save_artifact(artifact, path)


def load_artifact(path: Path) -> Artifact:
    return ArtifactStore().load_artifact(path)
