from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel


class ErrorResponse(BaseModel):
    status: str = "error"
    error_type: str
    message: str
    details: Optional[Dict[str, Any]] = None


class NormalizeResponse(BaseModel):
    status: str = "success"
    sentences: List[List[str]]
    tokens: int


class GraphStatsResponse(BaseModel):
    status: str = "success"
    nodes: int
    edges: int
    degree_histogram: List[Tuple[int, int]]
    floor: Optional[int] = None
    slope: Optional[float] = None
    r_squared: Optional[float] = None


class EmbedResponse(BaseModel):
    status: str = "success"
    walk_length: int
    walks_per_node: int
    seed: int
    dimension: int
    embedding: List[float]
    no_known_words: bool


class ClassifyResponse(BaseModel):
    status: str = "success"
    label: str
    scores: Dict[str, float]
    no_known_words: bool
