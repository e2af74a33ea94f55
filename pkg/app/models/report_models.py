from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class ClassMetrics(BaseModel):
    label: str
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float

    @property
    def support(self) -> int:
        return self.tp + self.fn


class EvalReport(BaseModel):
    classes: List[ClassMetrics]
    micro_f1: float
    macro_f1: float
    samples: int


class EpochLog(BaseModel):
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


class TrainingLog(BaseModel):
    epochs: List[EpochLog] = Field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")
    stopped_early: bool = False
    learning_rate: float = 0.0
    dropout: float = 0.0
    val_micro_f1: Optional[float] = None
    class_counts: Dict[str, int] = Field(default_factory=dict)


class RunRecord(BaseModel):
    """Aggregated result of one experiment configuration over R repeats"""

    name: str
    walk_length: int
    walks_per_node: int
    train_fraction: float
    repeats: int
    seeds: List[int]
    micro_f1_runs: List[float]
    macro_f1_runs: List[float]
    micro_f1_mean: float
    micro_f1_sd: float
    macro_f1_mean: float
    macro_f1_sd: float
    phase_seconds: Dict[str, float] = Field(default_factory=dict)
    vocabulary_size: int = 0
    edges: int = 0
    test_oov_rate: float = 0.0
    train_documents: int = 0
    test_documents: int = 0
    empty_test_documents: int = 0
    dropped_classes: List[str] = Field(default_factory=list)
    learning_rate: float = 0.0
    dropout: float = 0.0
    artifacts: Dict[str, str] = Field(default_factory=dict)


class ArtifactHeader(BaseModel):
    format: str
    version: int
    config_digest: str = ""
    params: Dict[str, str] = Field(default_factory=dict)
    digest: str = ""


class ProjectionPoint(BaseModel):
    doc_id: str
    x: float
    y: float
    label: str
