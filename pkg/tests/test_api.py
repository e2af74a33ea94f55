import numpy as np
import pytest
from fastapi.testclient import TestClient

from app.api.v1.endpoints.pipeline import get_inference_service
from app.core.config import Settings
from app.main import app, create_app
from app.models.config_models import PipelineConfig, WalkConfig
from app.models.corpus_models import CorpusStats
from app.services.classifier import MLPModel
from app.services.embedding import embed_corpus
from app.services.inference_service import InferenceService
from app.services.persistence import ArtifactStore, graph_digest
from app.services.text_normalizer import build_vocabulary
from app.services.word_graph import build_graph
from tests.conftest import make_document

COLOR_SENTENCES = [
    ["red", "green", "blue"],
    ["pear", "plum", "red"],
    ["green", "pear", "blue", "plum"],
    ["river", "flow", "red"],
]


@pytest.fixture
def artifacts(tmp_path):
    documents = [make_document(f"d{index}", [sentence]) for index, sentence in enumerate(COLOR_SENTENCES)]
    vocabulary = build_vocabulary(documents, PipelineConfig(min_count=1))
    graph = build_graph(documents, vocabulary).freeze()
    model = MLPModel.initialize(16, ["fruit", "paint"], (4,), np.random.default_rng(0))
    store = ArtifactStore()
    store.save_graph(graph, tmp_path / "graph.tsv")
    store.save_model(model, tmp_path / "model.bin")
    return tmp_path


def make_client(settings: Settings) -> TestClient:
    service = InferenceService(settings)
    app.dependency_overrides[get_inference_service] = lambda: service
    return TestClient(app)


@pytest.fixture
def client(artifacts):
    settings = Settings(
        graph_path=str(artifacts / "graph.tsv"),
        model_path=str(artifacts / "model.bin"),
        walk_length=3,
        walks_per_node=2,
        min_count=1,
    )
    yield make_client(settings)
    app.dependency_overrides.clear()


@pytest.fixture
def empty_client(tmp_path):
    settings = Settings(graph_path=str(tmp_path / "none.tsv"), model_path=str(tmp_path / "none.bin"))
    yield make_client(settings)
    app.dependency_overrides.clear()


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"
    assert response.json()["artifacts"] == {"graph": True, "model": True}


def test_health_reports_missing_artifacts(empty_client):
    body = empty_client.get("/health").json()
    assert body["status"] == "healthy"
    assert body["artifacts"] == {"graph": False, "model": False}


def test_root(client):
    body = client.get("/").json()
    assert body["docs_url"] == "/docs"
    assert "/api/v1/embed" in body["endpoints"]


def test_create_app_uses_given_prefix():
    custom = create_app(Settings(api_v1_prefix="/v2", app_name="Custom"))
    body = TestClient(custom).get("/").json()
    assert body["message"] == "Welcome to Custom"
    assert "/v2/classify" in body["endpoints"]


def test_normalize(client):
    response = client.post("/api/v1/normalize", json={"text": "The cats are running!"})
    assert response.status_code == 200
    assert response.json()["sentences"] == [["cat", "run"]]
    assert response.json()["tokens"] == 2


def test_graph_stats(client):
    response = client.get("/api/v1/graph/stats")
    assert response.status_code == 200
    body = response.json()
    assert body["nodes"] == 7
    assert body["edges"] == 9
    assert sum(count for _, count in body["degree_histogram"]) == 7


def test_graph_stats_rejects_bad_floor(client):
    assert client.get("/api/v1/graph/stats", params={"floor": 0}).status_code == 422


def test_embed(client):
    response = client.post("/api/v1/embed", json={"text": "Red green pear."})
    assert response.status_code == 200
    body = response.json()
    assert body["walk_length"] == 3
    assert body["dimension"] == 16
    assert len(body["embedding"]) == 16
    assert body["no_known_words"] is False


def test_embed_with_walk_length(client):
    body = client.post("/api/v1/embed", json={"text": "plum river", "walk_length": 2}).json()
    assert body["dimension"] == 9


def test_embed_unknown_words(client):
    body = client.post("/api/v1/embed", json={"text": "zebra xylophone"}).json()
    assert body["no_known_words"] is True
    assert not any(body["embedding"])


def test_embed_is_stable_across_requests(client):
    first = client.post("/api/v1/embed", json={"text": "blue plum"}).json()
    second = client.post("/api/v1/embed", json={"text": "plum blue"}).json()
    assert first["embedding"] == second["embedding"]


def test_classify(client):
    response = client.post("/api/v1/classify", json={"text": "Red pear and a green plum."})
    assert response.status_code == 200
    body = response.json()
    assert body["label"] in {"fruit", "paint"}
    assert set(body["scores"]) == {"fruit", "paint"}
    assert sum(body["scores"].values()) == pytest.approx(1.0)


def test_empty_text(client):
    response = client.post("/api/v1/embed", json={"text": "   "})
    assert response.status_code == 400
    assert response.json()["detail"]["error_type"] == "EmbeddingError"
    assert client.post("/api/v1/classify", json={"text": ""}).status_code == 400


def test_missing_graph(empty_client):
    response = empty_client.get("/api/v1/graph/stats")
    assert response.status_code == 404
    assert response.json()["detail"]["error_type"] == "ArtifactNotFoundError"


def test_missing_model(empty_client):
    assert empty_client.post("/api/v1/classify", json={"text": "red"}).status_code == 404


@pytest.fixture
def trained_artifacts(tmp_path):
    documents = [make_document(f"d{index}", [sentence]) for index, sentence in enumerate(COLOR_SENTENCES)]
    vocabulary = build_vocabulary(documents, PipelineConfig(min_count=1))
    graph = build_graph(documents, vocabulary).freeze()
    config = WalkConfig(walk_length=3, master_seed=9).resolve(CorpusStats.from_documents(documents).average_length)
    assert config.walks_per_node == 4
    matrix = embed_corpus(documents, graph, config, graph_digest(graph))
    model = MLPModel.initialize(16, ["fruit", "paint"], (4,), np.random.default_rng(0))
    model.embedding_source = matrix.source()
    store = ArtifactStore()
    store.save_graph(graph, tmp_path / "graph.tsv")
    store.save_model(model, tmp_path / "model.bin")
    return tmp_path, matrix


def serving_settings(directory) -> Settings:
    return Settings(
        graph_path=str(directory / "graph.tsv"),
        model_path=str(directory / "model.bin"),
        walk_length=3,
        min_count=1,
        seed=42,
    )


def test_served_embedding_matches_training_vectors(trained_artifacts):
    directory, matrix = trained_artifacts
    client = make_client(serving_settings(directory))
    try:
        body = client.post("/api/v1/embed", json={"text": "Green pear blue plum."}).json()
        assert (body["walk_length"], body["walks_per_node"], body["seed"]) == (3, 4, 9)
        assert np.allclose(body["embedding"], matrix.rows_for(["d2"])[0], atol=1e-12)

        other = client.post("/api/v1/embed", json={"text": "Green pear blue plum.", "walk_length": 2}).json()
        assert (other["walk_length"], other["walks_per_node"], other["seed"]) == (2, 1, 42)

        response = client.post("/api/v1/classify", json={"text": "Green pear blue plum."})
        assert response.status_code == 200
    finally:
        app.dependency_overrides.clear()


def test_model_from_another_graph_is_rejected(trained_artifacts):
    directory, matrix = trained_artifacts
    store = ArtifactStore()
    model = store.load_model(directory / "model.bin")
    model.embedding_source = matrix.source().model_copy(update={"graph_digest": "0000000000000000"})
    store.save_model(model, directory / "model.bin")
    client = make_client(serving_settings(directory))
    try:
        response = client.post("/api/v1/classify", json={"text": "Green pear blue plum."})
        assert response.status_code == 409
        assert response.json()["detail"]["error_type"] == "ArtifactChainError"
    finally:
        app.dependency_overrides.clear()
