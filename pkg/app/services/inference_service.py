import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.config import Settings, settings as default_settings
from app.core.exceptions import ArtifactChainError, ArtifactNotFoundError, DimensionMismatchError
from app.models.config_models import EmbeddingSource, WalkConfig
from app.models.corpus_models import DocumentRecord
from app.models.graph_models import DegreeHistogram
from app.services.classifier import MLPModel, predict
from app.services.embedding import DocumentEmbedder
from app.services.persistence import ArtifactStore, graph_digest
from app.services.text_normalizer import TextNormalizer
from app.services.word_graph import WordGraph

logger = logging.getLogger(__name__)


class InferenceService:
    """Normalize, embed and classify new text against frozen artifacts"""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or default_settings
        self.store = ArtifactStore()
        self.normalizer = TextNormalizer(self.settings.pipeline_config())
        self._graph: Optional[WordGraph] = None
        self._model: Optional[MLPModel] = None
        self._graph_digest: Optional[str] = None
        self._embedders: Dict[str, DocumentEmbedder] = {}

    @property
    def graph(self) -> WordGraph:
        if self._graph is None:
            path = Path(self.settings.graph_path)
            if not path.is_file():
                raise ArtifactNotFoundError(f"No graph artifact at '{path}'; run build-graph first")
            self._graph = self.store.load_graph(path)
            logger.info(f"Loaded graph {self._graph} from {path}")
        return self._graph

    @property
    def model(self) -> MLPModel:
        if self._model is None:
            path = Path(self.settings.model_path)
            if not path.is_file():
                raise ArtifactNotFoundError(f"No model artifact at '{path}'; run train first")
            self._model = self.store.load_model(path)
            logger.info(f"Loaded model {self._model.layer_sizes} from {path}")
        return self._model

    def normalize(self, text: str) -> List[List[str]]:
        return self.normalizer.normalize_text(text)

    def graph_stats(self, degree_floor: Optional[int] = None) -> Tuple[int, int, DegreeHistogram]:
        graph = self.graph
        return graph.num_nodes, graph.num_edges, graph.degree_histogram(degree_floor)

    def embedding_source(self) -> Optional[EmbeddingSource]:
        """Walk settings the loaded model was trained with, checked against the loaded graph"""
        if self._model is None and not Path(self.settings.model_path).is_file():
            return None
        source = self.model.embedding_source
        if source is None:
            return None
        if source.graph_digest and source.graph_digest != self.loaded_graph_digest:
            raise ArtifactChainError(
                f"Model was trained on embeddings of graph {source.graph_digest}, "
                f"but the loaded graph is {self.loaded_graph_digest}"
            )
        return source

    @property
    def loaded_graph_digest(self) -> str:
        if self._graph_digest is None:
            self._graph_digest = graph_digest(self.graph)
        return self._graph_digest

    def walk_config(self, walk_length: Optional[int] = None) -> WalkConfig:
        """
        Walk settings for served embeddings

        The model's own settings win whenever they cover the requested walk
        length; otherwise walks_per_node and seed come from settings.
        """
        source = self.embedding_source()
        if source is not None and walk_length in (None, source.walk_length):
            return source.walk_config(threads=self.settings.threads)
        return WalkConfig(
            walk_length=walk_length or self.settings.walk_length,
            walks_per_node=self.settings.walks_per_node or 1,
            master_seed=self.settings.seed,
            threads=self.settings.threads,
        )

    def _embedder(self, config: WalkConfig) -> DocumentEmbedder:
        key = config.digest()
        if key not in self._embedders:
            self._embedders[key] = DocumentEmbedder(self.graph, config)
        return self._embedders[key]

    def embed(self, text: str, walk_length: Optional[int] = None) -> Tuple[np.ndarray, List[List[str]], bool]:
        """Embedding of one text; returns (vector, normalized sentences, no-known-word flag)"""
        sentences = self.normalize(text)
        document = DocumentRecord(id="request", label="", sentences=sentences, normalized=True)
        vector, is_empty = self._embedder(self.walk_config(walk_length)).embed_document(document)
        return vector, sentences, is_empty

    def classify(self, text: str) -> Tuple[str, Dict[str, float], bool]:
        """Predicted label and per-class scores, embedded the way the model's training vectors were"""
        model = self.model
        source = self.embedding_source()
        if source is not None:
            walk_length = source.walk_length
        else:
            walk_length = math.isqrt(model.input_dim) - 1
        if (walk_length + 1) ** 2 != model.input_dim:
            raise DimensionMismatchError(
                f"Model input size {model.input_dim} does not match walk length {walk_length}"
            )
        vector, _, is_empty = self.embed(text, walk_length)
        labels, scores = predict(model, vector.reshape(1, -1))
        return labels[0], {label: float(score) for label, score in zip(model.classes, scores[0])}, is_empty
