import numpy as np
import pytest

from app.core.exceptions import UnknownNodeError
from app.models.config_models import PipelineConfig
from app.services.text_normalizer import build_vocabulary
from app.services.word_graph import WordGraph, build_graph, update_graph
from tests.conftest import TOY_EDGES, make_document, make_vocabulary, random_graph


def edge_counts_by_word(graph):
    words = graph.vocabulary.id_to_word
    return {tuple(sorted((words[i], words[j]))): count for i, j, count in graph.edges()}


def test_toy_graph_edges(toy_graph):
    assert edge_counts_by_word(toy_graph) == TOY_EDGES
    assert toy_graph.num_edges == 9


def test_toy_graph_counts_every_pair(toy_graph):
    assert toy_graph.total_count == 13
    assert toy_graph.stats.pairs_processed == 13
    assert toy_graph.stats.oov_pairs_skipped == 0


def test_symmetry_and_weighted_degree(toy_graph):
    for i in range(toy_graph.num_nodes):
        for j in toy_graph.neighbors(i):
            assert toy_graph.count(i, j) == toy_graph.count(j, i)
        assert toy_graph.count(i, i) == 0
        assert toy_graph.weighted_degree(i) == sum(toy_graph.count(i, j) for j in toy_graph.neighbors(i))


def test_transition_distribution_w3(toy_graph):
    vocabulary = toy_graph.vocabulary
    distribution = toy_graph.transition_distribution(vocabulary.id_of("w3"))
    by_word = {vocabulary.word_of(node): p for node, p in distribution.as_dict().items()}
    assert by_word == pytest.approx({"w2": 2 / 6, "w5": 2 / 6, "w4": 1 / 6, "w1": 1 / 6}, abs=1e-15)
    assert distribution.neighbors == sorted(distribution.neighbors)
    assert sum(distribution.probabilities) == pytest.approx(1.0, abs=1e-12)


def test_transition_distribution_w6(toy_graph):
    vocabulary = toy_graph.vocabulary
    distribution = toy_graph.transition_distribution(vocabulary.id_of("w6"))
    by_word = {vocabulary.word_of(node): p for node, p in distribution.as_dict().items()}
    assert by_word == {"w1": 0.5, "w5": 0.5}


def test_single_neighbor_and_isolated_node():
    graph = WordGraph(make_vocabulary(["a", "b", "c"]))
    graph.update(make_document("d", [["a", "b"]]))
    assert graph.transition_distribution(0).as_dict() == {1: 1.0}
    isolated = graph.transition_distribution(2)
    assert isolated.is_dead_end
    assert isolated.probabilities == []


def test_single_token_document_has_no_edges():
    graph = build_graph([make_document("d", [["a"]])], make_vocabulary(["a"]))
    assert graph.num_edges == 0


def test_document_order_does_not_matter(toy_documents, toy_vocabulary):
    forward = build_graph(toy_documents, toy_vocabulary)
    backward = build_graph(list(reversed(toy_documents)), toy_vocabulary)
    assert forward == backward


def test_update_grows_edge(toy_documents, toy_vocabulary):
    graph = build_graph(toy_documents[:1], toy_vocabulary)
    w2, w3 = toy_vocabulary.id_of("w2"), toy_vocabulary.id_of("w3")
    assert graph.count(w2, w3) == 1
    update_graph(graph, toy_documents[1])
    assert graph.count(w2, w3) == 2


def test_empty_document_is_noop(toy_graph, toy_documents, toy_vocabulary):
    graph = build_graph(toy_documents, toy_vocabulary)
    update_graph(graph, make_document("empty", []))
    assert graph == toy_graph


def test_replay_equivalence(toy_documents, toy_vocabulary, toy_graph):
    graph = build_graph(toy_documents[:3], toy_vocabulary)
    update_graph(graph, toy_documents[3])
    assert graph == toy_graph


def test_self_loops_collapse():
    graph = build_graph([make_document("d", [["a", "a", "b"]])], make_vocabulary(["a", "b"]))
    assert graph.count(0, 0) == 0
    assert graph.count(0, 1) == 1
    assert graph.stats.self_loops_skipped == 1


def test_oov_tokens_break_pairs():
    graph = build_graph([make_document("d", [["a", "zz", "b"]])], make_vocabulary(["a", "b"]))
    assert graph.num_edges == 0
    assert graph.stats.oov_pairs_skipped == 2


def test_pairs_never_cross_sentences():
    graph = build_graph([make_document("d", [["a", "b"], ["c", "d"]])], make_vocabulary(["a", "b", "c", "d"]))
    assert graph.count(1, 2) == 0
    assert graph.num_edges == 2


def test_open_vocabulary_appends_words(toy_documents, toy_vocabulary):
    graph = build_graph(toy_documents, toy_vocabulary.model_copy(deep=True), open_vocabulary=True)
    graph.freeze()
    update_graph(graph, make_document("new", [["w1", "fresh"]]))
    fresh = graph.vocabulary.id_of("fresh")
    assert fresh == 6
    assert graph.num_nodes == 7
    assert graph.count(graph.vocabulary.id_of("w1"), fresh) == 1
    assert graph.stats.words_added == 1
    assert graph.csr.shape == (7, 7)


def test_closed_vocabulary_skips_unseen_words(toy_graph, toy_documents, toy_vocabulary):
    graph = build_graph(toy_documents, toy_vocabulary)
    update_graph(graph, make_document("new", [["w1", "fresh"]]))
    assert graph == toy_graph


def test_degree_histogram_toy(toy_graph):
    histogram = toy_graph.degree_histogram()
    assert histogram.bins == [(2, 1), (3, 4), (4, 1)]


def test_degree_histogram_single_edge():
    graph = build_graph([make_document("d", [["a", "b"]])], make_vocabulary(["a", "b"]))
    assert graph.degree_histogram().bins == [(1, 2)]


def test_degree_histogram_empty_graph():
    assert WordGraph(make_vocabulary([])).degree_histogram().bins == []


def test_degree_histogram_includes_isolated_nodes():
    graph = build_graph([make_document("d", [["a", "b"]])], make_vocabulary(["a", "b", "c"]))
    assert graph.degree_histogram().bins == [(0, 1), (1, 2)]


def test_power_law_tail_fit_on_scale_free_graph():
    # preferential attachment gives a heavy degree tail
    rng = np.random.default_rng(1)
    nodes = 3000
    graph = WordGraph(make_vocabulary([f"n{index}" for index in range(nodes)]))
    targets = [0, 1]
    graph.add_pair(0, 1)
    for node in range(2, nodes):
        chosen = set()
        while len(chosen) < min(2, node):
            chosen.add(targets[int(rng.integers(len(targets)))])
        for other in chosen:
            graph.add_pair(node, other)
            targets.extend([node, other])
    histogram = graph.degree_histogram()
    assert histogram.slope < 0
    assert histogram.r_squared >= 0.8


def test_csr_matches_adjacency(toy_graph):
    matrix = toy_graph.csr
    assert (matrix != matrix.T).nnz == 0
    assert int(matrix.sum()) == 2 * toy_graph.total_count
    for i in range(toy_graph.num_nodes):
        row = matrix.indices[matrix.indptr[i]:matrix.indptr[i + 1]].tolist()
        assert row == toy_graph.neighbors(i)


def test_relabeling_permutation():
    graph = random_graph(nodes=50, edges=120, seed=3)
    permutation = np.random.default_rng(4).permutation(50).tolist()
    relabeled = graph.relabeled(permutation)
    for i, j, count in graph.edges():
        assert relabeled.count(permutation[i], permutation[j]) == count
    assert relabeled.num_edges == graph.num_edges
    assert relabeled.vocabulary.word_of(permutation[7]) == graph.vocabulary.word_of(7)


def test_unknown_node(toy_graph):
    with pytest.raises(UnknownNodeError):
        toy_graph.transition_distribution(99)


def test_vocabulary_from_normalized_docs(toy_documents):
    vocabulary = build_vocabulary(toy_documents, PipelineConfig(min_count=3))
    assert vocabulary.id_to_word == ["w3", "w4", "w5"]
