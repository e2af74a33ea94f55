import numpy as np
import pytest

from app.core.exceptions import EmbeddingError
from app.models.config_models import WalkConfig
from app.services.embedding import (
    DocumentEmbedder,
    anonymize_walk,
    embed_corpus,
    embed_document,
    node_embedding,
    node_embeddings,
)
from app.services.walker import generate_walks, sample_walk
from tests.conftest import make_document, random_graph


def test_anonymize_walk():
    assert anonymize_walk([5, 3, 5, 7]).tolist() == [1, 2, 1, 3]
    assert anonymize_walk([4, 4, 4]).tolist() == [1, 1, 1]
    assert anonymize_walk([9]).tolist() == [1]


def test_anonymize_empty_walk():
    with pytest.raises(EmbeddingError):
        anonymize_walk([])


def test_node_embedding_example():
    vector = node_embedding([[0, 1, 0, 2]], 3)
    expected = np.zeros((4, 4))
    expected[0, 1] = 0.5
    expected[0, 2] = 0.5
    expected[1, 0] = 1.0
    assert vector.shape == (16,)
    assert np.array_equal(vector, expected.reshape(-1))


def test_node_embedding_pools_counts_over_walks():
    vector = node_embedding([[0, 1, 0], [0, 1, 2]], 2).reshape(3, 3)
    assert vector[0].tolist() == [0.0, 1.0, 0.0]
    assert vector[1].tolist() == [0.5, 0.0, 0.5]
    assert vector[2].tolist() == [0.0, 0.0, 0.0]


def test_isolated_node_embeds_to_zero():
    vector = node_embedding([[3]], 4)
    assert vector.shape == (25,)
    assert not vector.any()


def test_node_embedding_rejects_mixed_starts():
    with pytest.raises(EmbeddingError):
        node_embedding([[0, 1], [1, 0]], 1)
    with pytest.raises(EmbeddingError):
        node_embedding([], 1)


def test_walk_longer_than_m_is_rejected():
    with pytest.raises(EmbeddingError):
        node_embedding([[0, 1, 2, 3]], 2)


def _naive_matrix(walk, m):
    names = []
    for node in walk:
        if node not in names:
            names.append(node)
    labels = [names.index(node) for node in walk]
    counts = [[0] * (m + 1) for _ in range(m + 1)]
    for a, b in zip(labels, labels[1:]):
        counts[a][b] += 1
    rows = []
    for row in counts:
        total = sum(row)
        rows.append([value / total if total else 0.0 for value in row])
    return np.array(rows).reshape(-1)


def _enumerate_walks(graph, start, steps):
    walks = [([start], 1.0)]
    for _ in range(steps):
        extended = []
        for walk, probability in walks:
            distribution = graph.transition_distribution(walk[-1])
            for neighbor, p in zip(distribution.neighbors, distribution.probabilities):
                extended.append((walk + [neighbor], probability * p))
        walks = extended
    return walks


@pytest.mark.parametrize("steps", [1, 2, 3, 4])
def test_single_walk_matrices_match_naive_oracle(toy_graph, steps):
    for start in range(toy_graph.num_nodes):
        for walk, _ in _enumerate_walks(toy_graph, start, steps):
            assert np.allclose(node_embedding([walk], steps), _naive_matrix(walk, steps))


def test_many_walks_converge_to_expected_matrix(toy_graph):
    m = 2
    start = toy_graph.vocabulary.id_of("w3")
    expected_counts = np.zeros((m + 1, m + 1))
    for walk, probability in _enumerate_walks(toy_graph, start, m):
        labels = anonymize_walk(walk)
        for a, b in zip(labels[:-1], labels[1:]):
            expected_counts[a - 1, b - 1] += probability
    totals = expected_counts.sum(axis=1, keepdims=True)
    expected = np.divide(expected_counts, totals, out=np.zeros_like(expected_counts), where=totals > 0)

    rng = np.random.default_rng(7)
    walks = [sample_walk(toy_graph, start, m, rng) for _ in range(20000)]
    observed = node_embedding(walks, m).reshape(m + 1, m + 1)
    assert np.allclose(observed, expected, atol=0.02)


def test_rows_are_stochastic_or_zero():
    graph = random_graph()
    m = 5
    walks = generate_walks(graph, WalkConfig(walk_length=m, walks_per_node=5, master_seed=3))
    matrix = node_embeddings(walks, m, graph.num_nodes)
    assert matrix.shape == (200, 36)
    assert (matrix >= 0).all()
    for vector in matrix:
        sums = vector.reshape(m + 1, m + 1).sum(axis=1)
        assert all(abs(total - 1.0) < 1e-12 or total == 0.0 for total in sums)


def test_embed_document_is_mean_of_occurrences(toy_graph):
    vocabulary = toy_graph.vocabulary
    embeddings = np.arange(6 * 4, dtype=float).reshape(6, 4)
    document = make_document("d", [["w1", "w3"], ["w3", "unknown"]])
    vector, is_empty = embed_document(document, embeddings, vocabulary)
    w1, w3 = vocabulary.id_of("w1"), vocabulary.id_of("w3")
    assert not is_empty
    assert np.allclose(vector, (embeddings[w1] + 2 * embeddings[w3]) / 3)


def test_embed_document_ignores_token_order(toy_graph):
    rng = np.random.default_rng(0)
    embeddings = rng.random((6, 9))
    tokens = ["w1", "w2", "w3", "w4", "w5", "w6", "w3", "w5"]
    forward, _ = embed_document(make_document("a", [tokens]), embeddings, toy_graph.vocabulary)
    shuffled = [tokens[index] for index in rng.permutation(len(tokens))]
    backward, _ = embed_document(make_document("b", [shuffled[:3], shuffled[3:]]), embeddings, toy_graph.vocabulary)
    assert np.array_equal(forward, backward)


def test_embed_document_without_known_words(toy_graph):
    embeddings = np.ones((6, 4))
    vector, is_empty = embed_document(make_document("d", [["nothing", "known"]]), embeddings, toy_graph.vocabulary)
    assert is_empty
    assert not vector.any()
    vector, is_empty = embed_document(make_document("e", []), embeddings, toy_graph.vocabulary)
    assert is_empty
    assert vector.shape == (4,)


def test_embed_corpus_toy(toy_graph, toy_documents):
    config = WalkConfig(walk_length=3, walks_per_node=2, master_seed=4)
    first = embed_corpus(toy_documents, toy_graph, config)
    second = embed_corpus(toy_documents, toy_graph, config)
    assert first.vectors.shape == (4, 16)
    assert first.dim == 16
    assert first.ids == ["d1", "d2", "d3", "d4"]
    assert first.walk_length == 3
    assert first.walks_per_node == 2
    assert np.array_equal(first.vectors, second.vectors)
    assert first.empty_documents == []


def test_embed_corpus_flags_empty_documents(toy_graph, toy_documents):
    documents = toy_documents + [make_document("blank", [["zzz"]])]
    matrix = DocumentEmbedder(toy_graph, WalkConfig(walk_length=2, walks_per_node=1)).embed_corpus(documents)
    assert matrix.empty_documents == ["blank"]
    assert not matrix.vectors[-1].any()


def test_rows_for(toy_graph, toy_documents):
    matrix = embed_corpus(toy_documents, toy_graph, WalkConfig(walk_length=2, walks_per_node=1))
    assert np.array_equal(matrix.rows_for(["d3", "d1"]), matrix.vectors[[2, 0]])
    with pytest.raises(EmbeddingError):
        matrix.rows_for(["missing"])


def test_seed_changes_embeddings(toy_graph, toy_documents):
    vectors = [
        embed_corpus(toy_documents, toy_graph, WalkConfig(walk_length=6, walks_per_node=1, master_seed=seed)).vectors
        for seed in (1, 2, 3)
    ]
    assert any(not np.array_equal(vectors[0], other) for other in vectors[1:])


def test_enumerated_probabilities_sum_to_one(toy_graph):
    for steps in (1, 3):
        total = sum(p for _, p in _enumerate_walks(toy_graph, 0, steps))
        assert total == pytest.approx(1.0)
    assert len(_enumerate_walks(toy_graph, 0, 1)) == 4


def test_two_anonymous_walks_example():
    # walks whose anonymous forms are (1,2,1,3) and (1,2,3,2)
    vector = node_embedding([[7, 4, 7, 9], [7, 4, 9, 4]], 3).reshape(4, 4)
    assert np.allclose(vector[0], [0, 2 / 3, 1 / 3, 0])
    assert np.allclose(vector[1], [1 / 2, 0, 1 / 2, 0])
    assert np.allclose(vector[2], [0, 1, 0, 0])
    assert not vector[3].any()
