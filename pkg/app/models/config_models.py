import re
from functools import lru_cache
from pathlib import Path
from typing import FrozenSet, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.utils.format_helpers import FormatHelper

DEFAULT_STOPWORDS_PATH = Path(__file__).resolve().parent.parent / "data" / "stopwords_en.txt"

# Characters removed from tokens: anything that is neither a letter nor whitespace.
NON_WORD_PATTERN = re.compile(r"[^\w\s]|[\d_]", re.UNICODE)

LEARNING_RATES: Tuple[float, ...] = (0.1, 0.001, 0.0001, 0.02, 0.002, 0.003)
DROPOUT_RATES: Tuple[float, ...] = (0.1, 0.2, 0.5)
HIDDEN_LAYERS: Tuple[int, ...] = (64, 128, 256, 512)

# Average tokens per document at or above which one walk per node suffices.
LONG_DOCUMENT_THRESHOLD = 40.0


def read_stopwords(path: Union[str, Path]) -> FrozenSet[str]:
    """Load a one-word-per-line stopword file, cleaned the way tokens are"""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = NON_WORD_PATTERN.sub("", line.strip().lower())
        if word:
            words.add(word)
    return frozenset(words)


@lru_cache(maxsize=1)
def default_stopwords() -> FrozenSet[str]:
    return read_stopwords(DEFAULT_STOPWORDS_PATH)


class PipelineConfig(BaseModel):
    """Text normalization and vocabulary settings"""

    model_config = ConfigDict(frozen=True)

    min_count: int = Field(default=5, ge=1)
    stopwords: FrozenSet[str] = Field(default_factory=default_stopwords)
    stemming: bool = True
    sentence_delimiters: str = Field(default=".!?", min_length=1)
    open_vocabulary: bool = False

    @classmethod
    def with_stopwords(cls, stopwords_path: Optional[Union[str, Path]] = None, **kwargs) -> "PipelineConfig":
        if stopwords_path is not None:
            kwargs["stopwords"] = read_stopwords(stopwords_path)
        return cls(**kwargs)

    def canonical(self) -> dict:
        data = self.model_dump()
        data["stopwords"] = sorted(self.stopwords)
        return data

    def digest(self) -> str:
        return FormatHelper.digest_config(self.canonical())


class WalkConfig(BaseModel):
    """Weighted random walk settings; walks_per_node=None defers to the document-length rule"""

    model_config = ConfigDict(frozen=True)

    walk_length: int = Field(default=15, ge=1)
    walks_per_node: Optional[int] = Field(default=None, ge=1)
    master_seed: int = 42
    threads: int = Field(default=1, ge=1)

    @property
    def embedding_dim(self) -> int:
        return (self.walk_length + 1) ** 2

    def resolve(self, average_document_length: float) -> "WalkConfig":
        if self.walks_per_node is not None:
            return self
        walks = 1 if average_document_length >= LONG_DOCUMENT_THRESHOLD else 4
        return self.model_copy(update={"walks_per_node": walks})

    def digest(self) -> str:
        return FormatHelper.digest_config(self.model_dump(exclude={"threads"}))


class EmbeddingSource(BaseModel):
    """Resolved walk settings and graph digest behind a set of document vectors"""

    model_config = ConfigDict(frozen=True)

    walk_length: int = Field(ge=1)
    walks_per_node: int = Field(ge=1)
    seed: int
    graph_digest: str = ""

    def walk_config(self, threads: int = 1) -> WalkConfig:
        return WalkConfig(
            walk_length=self.walk_length,
            walks_per_node=self.walks_per_node,
            master_seed=self.seed,
            threads=threads,
        )


class TrainConfig(BaseModel):
    """Classifier training protocol"""

    model_config = ConfigDict(frozen=True)

    learning_rate: float = 0.001
    dropout: float = 0.2
    batch_size: int = Field(default=64, ge=1)
    patience: int = Field(default=10, ge=1)
    max_epochs: int = Field(default=200, ge=1)
    validation_fraction: float = Field(default=0.1, gt=0.0, lt=1.0)
    hidden_layers: Tuple[int, ...] = HIDDEN_LAYERS
    standardize: bool = True
    seed: int = 42
    allow_custom_hyperparameters: bool = False

    @model_validator(mode="after")
    def check_published_sets(self) -> "TrainConfig":
        if self.allow_custom_hyperparameters:
            return self
        if self.learning_rate not in LEARNING_RATES:
            raise ValueError(f"learning_rate must be one of {LEARNING_RATES}")
        if self.dropout not in DROPOUT_RATES:
            raise ValueError(f"dropout must be one of {DROPOUT_RATES}")
        return self

    def digest(self) -> str:
        return FormatHelper.digest_config(self.model_dump())


class ExperimentSpec(BaseModel):
    """One experiment: corpus, split, walk grid, training protocol, repeats"""

    name: str = "run"
    corpus_path: Optional[Path] = None
    corpus_format: Optional[Literal["jsonl", "tsv"]] = None
    split_mode: Literal["given-splits", "fraction"] = "fraction"
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)
    train_fraction: float = Field(default=1.0, gt=0.0, le=1.0)
    walk_lengths: List[int] = Field(default_factory=lambda: [15], min_length=1)
    walks_per_node: List[Optional[int]] = Field(default_factory=lambda: [None], min_length=1)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    repeats: int = Field(default=5, ge=1)
    vary_seeds: bool = True
    master_seed: int = 42
    threads: int = Field(default=1, ge=1)
    hyperparameter_search: bool = False
    degree_floor: Optional[int] = Field(default=None, ge=1)
    out_dir: Optional[Path] = None

    @field_validator("walk_lengths")
    @classmethod
    def check_walk_lengths(cls, values: List[int]) -> List[int]:
        if any(value < 1 for value in values):
            raise ValueError("walk lengths must be >= 1")
        return values

    @field_validator("walks_per_node")
    @classmethod
    def check_walks_per_node(cls, values: List[Optional[int]]) -> List[Optional[int]]:
        if any(value is not None and value < 1 for value in values):
            raise ValueError("walks per node must be >= 1")
        return values

    def walk_config(self, walk_length: int, walks_per_node: Optional[int], seed: int) -> WalkConfig:
        return WalkConfig(
            walk_length=walk_length,
            walks_per_node=walks_per_node,
            master_seed=seed,
            threads=self.threads,
        )

    def summary(self) -> dict:
        """Flat view used in TSV header comments"""
        return {
            "name": self.name,
            "corpus": str(self.corpus_path) if self.corpus_path else "<memory>",
            "split_mode": self.split_mode,
            "test_fraction": self.test_fraction,
            "train_fraction": self.train_fraction,
            "repeats": self.repeats,
            "vary_seeds": self.vary_seeds,
            "seed": self.master_seed,
            "pipeline_digest": self.pipeline.digest(),
            "train_digest": self.train.digest(),
        }
