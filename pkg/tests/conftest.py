from typing import List

import numpy as np
import pytest

from app.models.config_models import PipelineConfig
from app.models.corpus_models import DocumentRecord, Vocabulary
from app.services.text_normalizer import build_vocabulary
from app.services.word_graph import WordGraph, build_graph

TOY_SENTENCES = {
    "d1": ["w1", "w2", "w3"],
    "d2": ["w4", "w2", "w3", "w5", "w4"],
    "d3": ["w6", "w5", "w4", "w3"],
    "d4": ["w6", "w1", "w3", "w5", "w4"],
}

TOY_EDGES = {
    ("w1", "w2"): 1,
    ("w2", "w3"): 2,
    ("w2", "w4"): 1,
    ("w3", "w5"): 2,
    ("w4", "w5"): 3,
    ("w5", "w6"): 1,
    ("w3", "w4"): 1,
    ("w1", "w6"): 1,
    ("w1", "w3"): 1,
}


def make_document(doc_id: str, sentences: List[List[str]], label: str = "x", split=None) -> DocumentRecord:
    return DocumentRecord(
        id=doc_id,
        label=label,
        raw_text=". ".join(" ".join(sentence) for sentence in sentences),
        sentences=sentences,
        split=split,
        normalized=True,
    )


def make_vocabulary(words: List[str]) -> Vocabulary:
    return Vocabulary(
        word_to_id={word: index for index, word in enumerate(words)},
        id_to_word=list(words),
        frequencies=[1] * len(words),
    )


def random_graph(nodes: int = 200, edges: int = 800, seed: int = 0) -> WordGraph:
    """Connected random multigraph: a ring plus random weighted chords"""
    rng = np.random.default_rng(seed)
    graph = WordGraph(make_vocabulary([f"n{index}" for index in range(nodes)]))
    for node in range(nodes):
        graph.add_pair(node, (node + 1) % nodes)
    for _ in range(edges):
        i, j = rng.integers(nodes, size=2)
        if i != j:
            graph.add_pair(int(i), int(j), int(rng.integers(1, 4)))
    return graph.freeze()


@pytest.fixture
def toy_documents() -> List[DocumentRecord]:
    return [make_document(doc_id, [tokens], label) for (doc_id, tokens), label in
            zip(TOY_SENTENCES.items(), ["a", "a", "b", "b"])]


@pytest.fixture
def toy_vocabulary(toy_documents) -> Vocabulary:
    return build_vocabulary(toy_documents, PipelineConfig(min_count=1))


@pytest.fixture
def toy_graph(toy_documents, toy_vocabulary) -> WordGraph:
    return build_graph(toy_documents, toy_vocabulary).freeze()
