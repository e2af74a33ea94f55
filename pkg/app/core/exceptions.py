from typing import Optional


class GTPMException(Exception):
    """Base exception for the GTPM pipeline"""

    phase: Optional[str] = None


class CorpusFormatError(GTPMException):
    """Raised when a corpus file cannot be parsed"""

    phase = "ingest"

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DuplicateDocumentError(GTPMException):
    """Raised when two corpus records share an id"""

    phase = "ingest"


class EmptyVocabularyError(GTPMException):
    """Raised when frequency filtering leaves no words"""

    phase = "vocabulary"


class UnknownNodeError(GTPMException):
    """Raised when a node id is not part of the word graph"""

    phase = "graph"


class EmbeddingError(GTPMException):
    """Raised when walks cannot be turned into embeddings"""

    phase = "embeddings"


class ClassifierError(GTPMException):
    """Raised when the classifier cannot be trained or applied"""

    phase = "train"


class SingleClassError(ClassifierError):
    """Raised when training data holds fewer than two classes"""
    pass


class DimensionMismatchError(ClassifierError):
    """Raised when input vectors do not match the model input size"""
    pass


class NonFiniteLossError(ClassifierError):
    """Raised when the training loss stops being finite"""
    pass


class MetricsError(GTPMException):
    """Raised when predictions and labels cannot be compared"""

    phase = "evaluate"


class ProjectionError(GTPMException):
    """Raised when embeddings cannot be projected"""

    phase = "project"


class ArtifactError(GTPMException):
    """Base class for on-disk artifact failures"""

    phase = "artifacts"


class ArtifactVersionError(ArtifactError):
    """Raised on an unknown format tag or version"""
    pass


class ArtifactTruncatedError(ArtifactError):
    """Raised when an artifact file ends early or is malformed"""
    pass


class ArtifactDigestError(ArtifactError):
    """Raised when stored and recomputed digests disagree"""
    pass


class ArtifactChainError(ArtifactError):
    """Raised when an artifact was derived from a different upstream artifact"""
    pass


class ExperimentError(GTPMException):
    """Raised when an experiment phase fails"""

    def __init__(self, phase: str, message: str):
        self.phase = phase
        super().__init__(message)


class ArtifactNotFoundError(ArtifactError):
    """Raised when a configured artifact file is missing"""
    pass
