import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import EmbeddingError
from app.models.config_models import EmbeddingSource, WalkConfig
from app.models.corpus_models import DocumentRecord, Vocabulary
from app.services.walker import Walk, WeightedWalker
from app.services.word_graph import WordGraph

logger = logging.getLogger(__name__)


def anonymize_walk(walk: Sequence[int]) -> np.ndarray:
    """Replace each node by the 1-based rank of its first occurrence in the walk"""
    if len(walk) == 0:
        raise EmbeddingError("Cannot anonymize an empty walk")
    first_seen: Dict[int, int] = {}
    labels = []
    for node in walk:
        node = int(node)
        if node not in first_seen:
            first_seen[node] = len(first_seen) + 1
        labels.append(first_seen[node])
    return np.asarray(labels, dtype=np.int64)


def transition_counts(walks: Sequence[Sequence[int]], m: int) -> np.ndarray:
    """(m+1)x(m+1) label-transition counts pooled over the anonymized walks"""
    size = m + 1
    counts = np.zeros((size, size), dtype=np.int64)
    for walk in walks:
        labels = anonymize_walk(walk)
        if labels.max() > size:
            raise EmbeddingError(f"Walk of {len(walk)} nodes exceeds walk length m={m}")
        np.add.at(counts, (labels[:-1] - 1, labels[1:] - 1), 1)
    return counts


def node_embedding(walks: Sequence[Sequence[int]], m: int) -> np.ndarray:
    """
    Flattened transition probability matrix of one node's walks

    Counts are pooled over all walks before each nonzero row is normalized to
    sum 1; rows without observed transitions stay zero, so an isolated node
    maps to the zero vector of length (m+1)^2.
    """
    if not walks:
        raise EmbeddingError("node_embedding needs at least one walk")
    start = int(walks[0][0]) if len(walks[0]) else None
    if any(len(walk) == 0 or int(walk[0]) != start for walk in walks):
        raise EmbeddingError("All walks of a node must be non-empty and share their start node")

    counts = transition_counts(walks, m).astype(np.float64)
    totals = counts.sum(axis=1, keepdims=True)
    matrix = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return matrix.reshape(-1)


def node_embeddings(walks_by_node: Dict[int, List[Walk]], m: int, num_nodes: int) -> np.ndarray:
    """Row i is the embedding of node i"""
    matrix = np.zeros((num_nodes, (m + 1) ** 2), dtype=np.float64)
    for node, walks in walks_by_node.items():
        matrix[node] = node_embedding(walks, m)
    return matrix


def embed_document(
    document: DocumentRecord,
    embeddings: np.ndarray,
    vocabulary: Vocabulary,
) -> Tuple[np.ndarray, bool]:
    """
    Mean of the node embeddings of every in-vocabulary token occurrence

    Returns the vector and whether the document had no in-vocabulary token
    (in which case the vector is all zeros).
    """
    ids = vocabulary.ids_for(document.tokens)
    ids = [node for node in ids if node < embeddings.shape[0]]
    if not ids:
        return np.zeros(embeddings.shape[1], dtype=np.float64), True
    # summed in id order, not token order
    ordered = np.sort(np.asarray(ids, dtype=np.int64))
    return embeddings[ordered].mean(axis=0), False


@dataclass
class EmbeddingMatrix:
    """Document embeddings plus the parameters that produced them"""

    ids: List[str]
    vectors: np.ndarray
    walk_length: int
    walks_per_node: int
    seed: int
    graph_digest: str = ""
    config_digest: str = ""
    empty_documents: List[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def source(self) -> EmbeddingSource:
        return EmbeddingSource(
            walk_length=self.walk_length,
            walks_per_node=self.walks_per_node,
            seed=self.seed,
            graph_digest=self.graph_digest,
        )

    def rows_for(self, ids: Sequence[str]) -> np.ndarray:
        index = {doc_id: row for row, doc_id in enumerate(self.ids)}
        missing = [doc_id for doc_id in ids if doc_id not in index]
        if missing:
            raise EmbeddingError(f"No embedding for documents {missing[:5]}")
        return self.vectors[[index[doc_id] for doc_id in ids]]


class DocumentEmbedder:
    """Walks -> node embeddings -> document embeddings for one frozen graph"""

    def __init__(self, graph: WordGraph, config: WalkConfig):
        self.graph = graph.freeze()
        self.config = config
        self._node_embeddings: Optional[np.ndarray] = None

    @property
    def node_embeddings(self) -> np.ndarray:
        if self._node_embeddings is None:
            walks = WeightedWalker(self.graph, self.config).generate_walks()
            self._node_embeddings = node_embeddings(walks, self.config.walk_length, self.graph.num_nodes)
        return self._node_embeddings

    def embed_document(self, document: DocumentRecord) -> Tuple[np.ndarray, bool]:
        return embed_document(document, self.node_embeddings, self.graph.vocabulary)

    def embed_corpus(
        self,
        documents: Sequence[DocumentRecord],
        graph_digest: str = "",
        config_digest: str = "",
    ) -> EmbeddingMatrix:
        vectors = np.zeros((len(documents), self.config.embedding_dim), dtype=np.float64)
        empty = []
        for row, document in enumerate(documents):
            vectors[row], is_empty = self.embed_document(document)
            if is_empty:
                empty.append(document.id)
        if empty:
            logger.warning(f"{len(empty)} documents have no in-vocabulary token; embedded as zero vectors")
        logger.info(f"Embedded {len(documents)} documents (dim={self.config.embedding_dim})")
        return EmbeddingMatrix(
            ids=[document.id for document in documents],
            vectors=vectors,
            walk_length=self.config.walk_length,
            walks_per_node=self.config.walks_per_node or 1,
            seed=self.config.master_seed,
            graph_digest=graph_digest,
            config_digest=config_digest,
            empty_documents=empty,
        )


def embed_corpus(
    documents: Sequence[DocumentRecord],
    graph: WordGraph,
    config: WalkConfig,
    graph_digest: str = "",
) -> EmbeddingMatrix:
    return DocumentEmbedder(graph, config).embed_corpus(documents, graph_digest=graph_digest)
