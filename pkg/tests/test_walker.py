import numpy as np
import pytest

from app.core.exceptions import UnknownNodeError
from app.models.config_models import WalkConfig
from app.services.walker import WeightedWalker, generate_walks, sample_walk, write_walk_dump
from app.services.word_graph import WordGraph
from tests.conftest import make_vocabulary, random_graph


def test_single_step_frequency_matches_counts(toy_graph):
    vocabulary = toy_graph.vocabulary
    w3, w5 = vocabulary.id_of("w3"), vocabulary.id_of("w5")
    rng = np.random.default_rng(0)
    trials = 60000
    hits = sum(int(sample_walk(toy_graph, w3, 1, rng)[1]) == w5 for _ in range(trials))
    assert hits / trials == pytest.approx(1 / 3, abs=0.01)


def test_sampled_distribution_matches_transitions(toy_graph):
    node = toy_graph.vocabulary.id_of("w3")
    expected = toy_graph.transition_distribution(node).as_dict()
    rng = np.random.default_rng(1)
    trials = 100000
    counts = {}
    for _ in range(trials):
        step = int(sample_walk(toy_graph, node, 1, rng)[1])
        counts[step] = counts.get(step, 0) + 1
    assert set(counts) == set(expected)
    for neighbor, probability in expected.items():
        assert counts[neighbor] / trials == pytest.approx(probability, abs=0.01)


def test_isolated_node_walk_stops():
    graph = WordGraph(make_vocabulary(["a", "b", "c"]))
    graph.add_pair(0, 1)
    walk = sample_walk(graph.freeze(), 2, 5, np.random.default_rng(0))
    assert walk.tolist() == [2]


def test_chain_graph_walk_alternates():
    graph = WordGraph(make_vocabulary(["a", "b", "c"]))
    graph.add_pair(0, 1)
    graph.add_pair(1, 2)
    walk = sample_walk(graph.freeze(), 0, 6, np.random.default_rng(3)).tolist()
    assert len(walk) == 7
    assert all(node in (0, 2) for node in walk[0::2])
    assert all(node == 1 for node in walk[1::2])


def test_every_step_follows_an_edge():
    graph = random_graph(nodes=60, edges=150, seed=2)
    walks = generate_walks(graph, WalkConfig(walk_length=8, walks_per_node=2, master_seed=5))
    for node, node_walks in walks.items():
        assert len(node_walks) == 2
        for walk in node_walks:
            assert int(walk[0]) == node
            assert len(walk) == 9
            for a, b in zip(walk[:-1], walk[1:]):
                assert graph.count(int(a), int(b)) > 0


def test_toy_walk_shape(toy_graph):
    walks = generate_walks(toy_graph, WalkConfig(walk_length=15, walks_per_node=1))
    assert sorted(walks) == list(range(6))
    assert all(len(node_walks) == 1 and len(node_walks[0]) == 16 for node_walks in walks.values())


def test_walks_are_deterministic(toy_graph):
    config = WalkConfig(walk_length=10, walks_per_node=2, master_seed=11)
    first = generate_walks(toy_graph, config)
    second = generate_walks(toy_graph, config)
    for node in first:
        for a, b in zip(first[node], second[node]):
            assert a.tolist() == b.tolist()


def test_walk_depends_only_on_node_and_index(toy_graph):
    walker = WeightedWalker(toy_graph, WalkConfig(walk_length=10, walks_per_node=2, master_seed=11))
    walks = walker.generate_walks()
    assert walker.walk(3, 1).tolist() == walks[3][1].tolist()


def test_different_seeds_give_different_walks():
    graph = random_graph(nodes=40, edges=120, seed=1)
    first = generate_walks(graph, WalkConfig(walk_length=10, walks_per_node=1, master_seed=1))
    second = generate_walks(graph, WalkConfig(walk_length=10, walks_per_node=1, master_seed=2))
    assert any(first[node][0].tolist() != second[node][0].tolist() for node in first)


def test_threads_do_not_change_walks():
    graph = random_graph()
    single = generate_walks(graph, WalkConfig(walk_length=6, walks_per_node=2, master_seed=9, threads=1))
    threaded = generate_walks(graph, WalkConfig(walk_length=6, walks_per_node=2, master_seed=9, threads=3))
    assert sorted(single) == sorted(threaded)
    for node in single:
        for a, b in zip(single[node], threaded[node]):
            assert a.tolist() == b.tolist()


def test_unresolved_walk_count_defaults_to_one(toy_graph):
    walks = generate_walks(toy_graph, WalkConfig(walk_length=3))
    assert all(len(node_walks) == 1 for node_walks in walks.values())


def test_unknown_start_node(toy_graph):
    with pytest.raises(UnknownNodeError):
        sample_walk(toy_graph, 42, 3, np.random.default_rng(0))


def test_walk_dump(toy_graph, tmp_path):
    walks = generate_walks(toy_graph, WalkConfig(walk_length=4, walks_per_node=2))
    path = write_walk_dump(walks, tmp_path / "dump" / "walks.txt")
    lines = path.read_text().splitlines()
    assert len(lines) == 12
    assert [int(line.split()[0]) for line in lines] == [node for node in range(6) for _ in range(2)]
    assert all(len(line.split()) == 5 for line in lines)
