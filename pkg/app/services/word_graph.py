import logging
from collections import Counter
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse, stats

from app.core.exceptions import UnknownNodeError
from app.models.corpus_models import DocumentRecord, Vocabulary
from app.models.graph_models import DegreeHistogram, GraphBuildStats, TransitionDistribution

logger = logging.getLogger(__name__)

# Half-octave bins for the log-log degree fit.
BIN_RATIO = 2 ** 0.5
MIN_FIT_POINTS = 3


class WordGraph:
    """
    Universal weighted word graph.

    Nodes are vocabulary ids; an undirected edge (i, j) stores how many times
    words i and j were adjacent inside a sentence. Counts live in per-node
    dicts while the graph grows; `freeze()` snapshots them into a CSR matrix
    with id-sorted neighbor lists for walking.
    """

    def __init__(self, vocabulary: Vocabulary, open_vocabulary: bool = False):
        self.vocabulary = vocabulary
        self.open_vocabulary = open_vocabulary
        self.stats = GraphBuildStats()
        self.config_digest = ""
        self._adjacency: List[Dict[int, int]] = [{} for _ in range(len(vocabulary))]
        self._csr: Optional[sparse.csr_matrix] = None
        self._walk_index: Optional[Tuple[List[int], List[int], List[int]]] = None

    @property
    def num_nodes(self) -> int:
        return len(self._adjacency)

    @property
    def num_edges(self) -> int:
        return sum(len(neighbors) for neighbors in self._adjacency) // 2

    @property
    def total_count(self) -> int:
        """Sum of counts with each undirected edge counted once"""
        return sum(sum(neighbors.values()) for neighbors in self._adjacency) // 2

    def count(self, i: int, j: int) -> int:
        self._check_node(i)
        self._check_node(j)
        return self._adjacency[i].get(j, 0)

    def neighbors(self, node: int) -> List[int]:
        self._check_node(node)
        return sorted(self._adjacency[node])

    def degree(self, node: int) -> int:
        self._check_node(node)
        return len(self._adjacency[node])

    def weighted_degree(self, node: int) -> int:
        self._check_node(node)
        return sum(self._adjacency[node].values())

    def edges(self) -> Iterator[Tuple[int, int, int]]:
        """Undirected edges (i, j, count) with i < j, in (i, j) order"""
        for i, neighbors in enumerate(self._adjacency):
            for j in sorted(neighbors):
                if i < j:
                    yield i, j, neighbors[j]

    def add_pair(self, i: int, j: int, count: int = 1) -> None:
        self._adjacency[i][j] = self._adjacency[i].get(j, 0) + count
        self._adjacency[j][i] = self._adjacency[j].get(i, 0) + count
        self._csr = None
        self._walk_index = None

    def update(self, document: DocumentRecord) -> GraphBuildStats:
        """Add the in-sentence consecutive pairs of one normalized document"""
        build_stats = GraphBuildStats(documents=1)
        for sentence in document.sentences:
            ids = [self._resolve(token, build_stats) for token in sentence]
            for a, b in zip(ids, ids[1:]):
                if a is None or b is None:
                    build_stats.oov_pairs_skipped += 1
                elif a == b:
                    build_stats.self_loops_skipped += 1
                else:
                    self.add_pair(a, b)
                    build_stats.pairs_processed += 1
        self.stats = self.stats.merge(build_stats)
        return build_stats

    def _resolve(self, token: str, build_stats: GraphBuildStats) -> Optional[int]:
        node = self.vocabulary.id_of(token)
        if node is not None or not self.open_vocabulary:
            if node is None:
                logger.debug(f"Skipping out-of-vocabulary word '{token}'")
            return node
        node = self.vocabulary.add(token)
        self._adjacency.append({})
        self._csr = None
        self._walk_index = None
        build_stats.words_added += 1
        return node

    def freeze(self) -> "WordGraph":
        """Build (or reuse) the CSR snapshot used by walkers"""
        if self._csr is None:
            size = self.num_nodes
            rows, cols, data = [], [], []
            for i, neighbors in enumerate(self._adjacency):
                for j, count in neighbors.items():
                    rows.append(i)
                    cols.append(j)
                    data.append(count)
            matrix = sparse.csr_matrix(
                (np.asarray(data, dtype=np.int64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                shape=(size, size),
                dtype=np.int64,
            )
            matrix.sort_indices()
            self._csr = matrix
        return self

    @property
    def csr(self) -> sparse.csr_matrix:
        return self.freeze()._csr

    def walk_index(self) -> Tuple[List[int], List[int], List[int]]:
        """
        (indptr, indices, cumulative) as plain lists for the walker's hot loop

        `cumulative` is the running sum of counts over the whole CSR data
        array, so row i's neighbor weights are cumulative[indptr[i]:indptr[i+1]]
        offset by the running sum before the row.
        """
        if self._walk_index is None:
            matrix = self.csr
            self._walk_index = (
                matrix.indptr.tolist(),
                matrix.indices.tolist(),
                np.cumsum(matrix.data, dtype=np.int64).tolist(),
            )
        return self._walk_index

    def transition_distribution(self, node: int) -> TransitionDistribution:
        """Next-step probabilities count(i, j) / weighted_degree(i) over id-sorted neighbors"""
        self._check_node(node)
        neighbors = self._adjacency[node]
        total = sum(neighbors.values())
        ordered = sorted(neighbors)
        return TransitionDistribution(
            source=node,
            neighbors=ordered,
            probabilities=[neighbors[j] / total for j in ordered],
        )

    def degree_histogram(self, floor: Optional[int] = None) -> DegreeHistogram:
        """
        Histogram of unweighted degrees and a power-law tail fit

        The fit regresses log density on log degree over half-octave bins
        starting at `floor`; the default floor is the most common nonzero degree.
        """
        if not self.num_nodes:
            return DegreeHistogram()

        degrees = np.array([len(neighbors) for neighbors in self._adjacency], dtype=np.int64)
        histogram = sorted(Counter(degrees.tolist()).items())
        result = DegreeHistogram(bins=[(int(d), int(c)) for d, c in histogram])

        positive = [(d, c) for d, c in histogram if d > 0]
        if not positive:
            return result
        if floor is None:
            floor = max(positive, key=lambda item: (item[1], -item[0]))[0]
        result.floor = int(floor)

        tail = degrees[degrees >= floor]
        if tail.size == 0:
            return result
        x, y = self._log_binned_density(tail, floor)
        if len(x) < MIN_FIT_POINTS:
            x = np.log(np.array([d for d, _ in positive if d >= floor], dtype=float))
            y = np.log(np.array([c for d, c in positive if d >= floor], dtype=float))
        if len(x) < 2:
            return result

        fit = stats.linregress(x, y)
        result.slope = float(fit.slope)
        result.intercept = float(fit.intercept)
        result.r_squared = float(fit.rvalue ** 2)
        result.fitted_points = int(len(x))
        return result

    @staticmethod
    def _log_binned_density(tail: np.ndarray, floor: int) -> Tuple[np.ndarray, np.ndarray]:
        top = int(tail.max()) + 1
        edges = [int(floor)]
        while edges[-1] < top:
            edges.append(max(edges[-1] + 1, int(round(edges[-1] * BIN_RATIO))))
        edges = np.array(edges, dtype=np.int64)
        counts, _ = np.histogram(tail, bins=edges)
        widths = np.diff(edges)
        centers = np.sqrt(edges[:-1] * (edges[1:] - 1).clip(min=edges[:-1]))
        mask = counts > 0
        return np.log(centers[mask]), np.log(counts[mask] / widths[mask])

    def relabeled(self, permutation: Sequence[int]) -> "WordGraph":
        """Copy of the graph with node i renamed to permutation[i]"""
        permutation = list(permutation)
        size = self.num_nodes
        if sorted(permutation) != list(range(size)):
            raise ValueError("permutation must cover every node id exactly once")
        words = [""] * size
        frequencies = [0] * size
        for old, new in enumerate(permutation):
            words[new] = self.vocabulary.id_to_word[old]
            frequencies[new] = self.vocabulary.frequencies[old]
        vocabulary = Vocabulary(
            word_to_id={word: index for index, word in enumerate(words)},
            id_to_word=words,
            frequencies=frequencies,
        )
        graph = WordGraph(vocabulary, open_vocabulary=self.open_vocabulary)
        for i, j, count in self.edges():
            graph.add_pair(permutation[i], permutation[j], count)
        graph.stats = self.stats.model_copy()
        graph.config_digest = self.config_digest
        return graph

    def _check_node(self, node: int) -> None:
        if not 0 <= node < self.num_nodes:
            raise UnknownNodeError(f"Node {node} is not in the graph ({self.num_nodes} nodes)")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WordGraph):
            return NotImplemented
        return (
            self.vocabulary.id_to_word == other.vocabulary.id_to_word
            and self._adjacency == other._adjacency
        )

    def __repr__(self) -> str:
        return f"WordGraph(nodes={self.num_nodes}, edges={self.num_edges})"


def build_graph(
    documents: Iterable[DocumentRecord],
    vocabulary: Vocabulary,
    open_vocabulary: bool = False,
) -> WordGraph:
    """Universal word graph from normalized documents (training split only)"""
    graph = WordGraph(vocabulary, open_vocabulary=open_vocabulary)
    for document in documents:
        graph.update(document)
    logger.info(
        f"Built word graph: {graph.num_nodes} nodes, {graph.num_edges} edges, "
        f"{graph.stats.pairs_processed} pairs ({graph.stats.oov_pairs_skipped} OOV, "
        f"{graph.stats.self_loops_skipped} self-loop pairs skipped)"
    )
    return graph


def update_graph(graph: WordGraph, document: DocumentRecord) -> WordGraph:
    """Grow an existing graph with one more document; counts only increase"""
    graph.update(document)
    return graph
