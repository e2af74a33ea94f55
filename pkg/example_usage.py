#!/usr/bin/env python3
"""
Example script demonstrating the GTPM pipeline as a library and through the API
"""

import sys
from pathlib import Path

import httpx

from app.core.logging_config import setup_logging
from app.models.config_models import ExperimentSpec, PipelineConfig, TrainConfig, WalkConfig
from app.services.embedding import embed_corpus
from app.services.experiment_runner import export_projection, run_experiment
from app.services.persistence import ArtifactStore, graph_digest
from app.services.synthetic import SyntheticCorpusConfig, generate_corpus
from app.services.text_normalizer import TextNormalizer, build_vocabulary
from app.services.word_graph import build_graph

API_BASE_URL = "http://localhost:8000"
OUTPUT_DIR = Path("samples")


def demo_normalization():
    """Show what the normalizer does to raw text"""
    print("Normalizing a short text...")
    normalizer = TextNormalizer()
    sentences = normalizer.normalize_text("The cats are running! Dogs bark at the birds.")
    for sentence in sentences:
        print(f"   {' '.join(sentence)}")
    print("✅ Normalization done")


def demo_graph_and_embeddings():
    """Build a word graph from a small synthetic corpus and embed its documents"""
    print("\nBuilding word graph and embeddings...")
    documents = generate_corpus(SyntheticCorpusConfig(documents_per_topic=50))
    vocabulary = build_vocabulary(documents, PipelineConfig(min_count=2))
    graph = build_graph(documents, vocabulary).freeze()

    histogram = graph.degree_histogram()
    print(f"📊 Graph: {graph.num_nodes} nodes, {graph.num_edges} edges")
    print(f"   Degree tail fit from degree {histogram.floor}: slope {histogram.slope:.3f}, R² {histogram.r_squared:.3f}")

    matrix = embed_corpus(documents, graph, WalkConfig(walk_length=15, walks_per_node=1), graph_digest(graph))
    print(f"   Embedded {len(matrix.ids)} documents into {matrix.dim} dimensions")

    store = ArtifactStore()
    store.save_graph(graph, OUTPUT_DIR / "graph.tsv")
    store.save_embeddings(matrix, OUTPUT_DIR / "embeddings.tsv")

    labels = {document.id: document.label for document in documents}
    projection = export_projection(matrix, labels, OUTPUT_DIR)
    print(f"   2D silhouette: {projection.silhouette:.3f}")
    print(f"✅ Artifacts written to {OUTPUT_DIR}/")


def demo_experiment():
    """Train and evaluate the classifier over two repeats"""
    print("\nRunning a small experiment...")
    documents = generate_corpus(SyntheticCorpusConfig(documents_per_topic=100))
    spec = ExperimentSpec(
        name="example",
        walk_lengths=[15],
        walks_per_node=[1],
        pipeline=PipelineConfig(min_count=2),
        train=TrainConfig(hidden_layers=(64, 32), max_epochs=50),
        repeats=2,
        out_dir=OUTPUT_DIR,
    )
    record = run_experiment(spec, documents)
    print(f"📈 Micro-F1 {record.micro_f1_mean:.4f} ± {record.micro_f1_sd:.4f}")
    print(f"   Macro-F1 {record.macro_f1_mean:.4f} ± {record.macro_f1_sd:.4f}")
    for phase, seconds in record.phase_seconds.items():
        print(f"   {phase}: {seconds:.2f}s")
    print("✅ Experiment done")


def demo_api():
    """Query a running server that was started with GRAPH_PATH pointing at a saved graph"""
    print("\nTesting the HTTP API...")
    try:
        response = httpx.get(f"{API_BASE_URL}/health", timeout=5)
    except httpx.ConnectError:
        print("❌ Cannot connect to API. Start it with: python -m app.cli serve")
        return False

    if response.status_code != 200:
        print(f"❌ Health check failed: {response.status_code}")
        return False

    response = httpx.post(f"{API_BASE_URL}/api/v1/embed", json={"text": "Some text to embed."}, timeout=60)
    if response.status_code == 200:
        body = response.json()
        print(f"✅ Embedding of dimension {body['dimension']} (no known words: {body['no_known_words']})")
        return True
    print(f"❌ Embed request failed: {response.status_code} {response.json()}")
    return False


def main():
    """Main function to run examples"""
    setup_logging("WARNING")
    print("🚀 GTPM Text Embedding - Example Usage\n")

    demo_normalization()
    demo_graph_and_embeddings()
    demo_experiment()

    if "--api" in sys.argv:
        demo_api()
    else:
        print("\n💡 Pass --api to also query a running server")
        print(f"API Documentation: {API_BASE_URL}/docs")


if __name__ == "__main__":
    main()
