from pathlib import Path
from typing import List, Optional, Union

from pydantic_settings import BaseSettings, SettingsConfigDict

from app.models.config_models import PipelineConfig, TrainConfig, WalkConfig


class Settings(BaseSettings):
    # Application
    app_name: str = "GTPM Text Embedding"
    app_version: str = "1.0.0"
    debug: bool = False
    log_level: str = "INFO"

    # API
    api_v1_prefix: str = "/api/v1"
    cors_origins: Union[str, List[str]] = ["*"]
    graph_path: str = "runs/graph.tsv"
    model_path: str = "runs/model.bin"

    # Corpus / vocabulary
    min_count: int = 5
    stemming: bool = True
    sentence_delimiters: str = ".!?"
    stopwords_path: Optional[str] = None
    open_vocabulary: bool = False

    # Walks
    walk_length: int = 15
    walks_per_node: Optional[int] = None
    seed: int = 42
    threads: int = 1

    # Classifier
    learning_rate: float = 0.001
    dropout: float = 0.2
    batch_size: int = 64
    patience: int = 10
    max_epochs: int = 200
    validation_fraction: float = 0.1
    standardize: bool = True
    hidden_layers: List[int] = [64, 128, 256, 512]
    hyperparameter_search: bool = False

    # Experiments
    split_mode: str = "fraction"
    test_fraction: float = 0.2
    train_fraction: float = 1.0
    repeats: int = 5
    vary_seeds: bool = True
    degree_floor: Optional[int] = None
    out_dir: str = "runs"

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        extra="forbid",
    )

    @property
    def get_cors_origins(self) -> List[str]:
        """Get CORS origins as list, handling both string and list formats"""
        if isinstance(self.cors_origins, str):
            if self.cors_origins == "*":
                return ["*"]
            return [origin.strip() for origin in self.cors_origins.split(",")]
        return self.cors_origins

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig.with_stopwords(
            min_count=self.min_count,
            stemming=self.stemming,
            sentence_delimiters=self.sentence_delimiters,
            open_vocabulary=self.open_vocabulary,
            stopwords_path=self.stopwords_path,
        )

    def walk_config(self) -> WalkConfig:
        return WalkConfig(
            walk_length=self.walk_length,
            walks_per_node=self.walks_per_node,
            master_seed=self.seed,
            threads=self.threads,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            dropout=self.dropout,
            batch_size=self.batch_size,
            patience=self.patience,
            max_epochs=self.max_epochs,
            validation_fraction=self.validation_fraction,
            standardize=self.standardize,
            hidden_layers=tuple(self.hidden_layers),
            seed=self.seed,
        )


def load_settings(config_file: Optional[str] = None, **overrides) -> Settings:
    """Build settings from the environment plus an optional flat key=value file"""
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if config_file is not None:
        return Settings(_env_file=config_file, **overrides)
    return Settings(**overrides)


settings = Settings()
