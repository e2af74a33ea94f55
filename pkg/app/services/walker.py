import logging
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from app.core.exceptions import UnknownNodeError
from app.models.config_models import WalkConfig
from app.services.word_graph import WordGraph
from app.utils.file_helpers import FileHelper
from app.utils.seeding import WALK_STREAM, SeedHelper

logger = logging.getLogger(__name__)

Walk = np.ndarray


def sample_walk(graph: WordGraph, start: int, m: int, rng: np.random.Generator) -> Walk:
    """
    One weighted random walk of up to m steps from `start`

    Exactly m uniforms are drawn from `rng` whatever the walk's fate, and step
    t picks the neighbor whose cumulative weight interval contains
    u_t * weighted_degree (inverse CDF over id-sorted neighbors). A node
    without neighbors ends the walk early.
    """
    indptr, indices, cumulative = graph.walk_index()
    if not 0 <= start < len(indptr) - 1:
        raise UnknownNodeError(f"Walk start {start} is not in the graph ({len(indptr) - 1} nodes)")

    uniforms = rng.random(m).tolist()
    walk = [start]
    current = start
    for u in uniforms:
        lo, hi = indptr[current], indptr[current + 1]
        if lo == hi:
            break
        base = cumulative[lo - 1] if lo > 0 else 0
        target = base + u * (cumulative[hi - 1] - base)
        position = min(bisect_right(cumulative, target, lo, hi), hi - 1)
        current = indices[position]
        walk.append(current)
    return np.asarray(walk, dtype=np.int64)


class WeightedWalker:
    """Generate the per-node walk sets for a frozen graph"""

    def __init__(self, graph: WordGraph, config: WalkConfig):
        self.graph = graph.freeze()
        self.config = config
        if config.walks_per_node is None:
            logger.info("walks_per_node unresolved; using 1 walk per node")
        self.walks_per_node = config.walks_per_node or 1

    def walk(self, node: int, index: int) -> Walk:
        """Walk number `index` from `node`; depends only on (master_seed, node, index)"""
        rng = SeedHelper.rng(self.config.master_seed, WALK_STREAM, node, index)
        return sample_walk(self.graph, node, self.config.walk_length, rng)

    def _walks_for_nodes(self, nodes: Sequence[int]) -> List[List[Walk]]:
        return [[self.walk(node, k) for k in range(self.walks_per_node)] for node in nodes]

    def generate_walks(self) -> Dict[int, List[Walk]]:
        nodes = list(range(self.graph.num_nodes))
        threads = self.config.threads
        if threads <= 1 or len(nodes) < 2 * threads:
            results = self._walks_for_nodes(nodes)
        else:
            chunks = [nodes[i::threads] for i in range(threads)]
            with ThreadPoolExecutor(max_workers=threads) as pool:
                chunk_results = list(pool.map(self._walks_for_nodes, chunks))
            results = [None] * len(nodes)
            for chunk, walks in zip(chunks, chunk_results):
                for node, node_walks in zip(chunk, walks):
                    results[node] = node_walks

        logger.info(
            f"Generated {len(nodes) * self.walks_per_node} walks "
            f"(m={self.config.walk_length}, n={self.walks_per_node}, threads={threads})"
        )
        return {node: walks for node, walks in zip(nodes, results)}


def generate_walks(graph: WordGraph, config: WalkConfig) -> Dict[int, List[Walk]]:
    return WeightedWalker(graph, config).generate_walks()


def write_walk_dump(walks: Dict[int, List[Walk]], path: Path) -> Path:
    """One line per walk, node ids separated by spaces, nodes then walk index ascending"""
    path = Path(path)
    FileHelper.ensure_dir(path.parent)
    with path.open("w", encoding="utf-8") as handle:
        for node in sorted(walks):
            for walk in walks[node]:
                handle.write(" ".join(str(int(step)) for step in walk) + "\n")
    return path
