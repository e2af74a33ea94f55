import logging
from functools import lru_cache
from typing import Optional

from fastapi import APIRouter, Depends, HTTPException, Query

from app.core.exceptions import (
    ArtifactChainError,
    ArtifactError,
    ArtifactNotFoundError,
    ClassifierError,
    EmbeddingError,
    GTPMException,
)
from app.models.request_models import EmbedRequest, TextRequest
from app.models.response_models import (
    ClassifyResponse,
    EmbedResponse,
    ErrorResponse,
    GraphStatsResponse,
    NormalizeResponse,
)
from app.services.inference_service import InferenceService

logger = logging.getLogger(__name__)
router = APIRouter()

ERROR_RESPONSES = {
    400: {"model": ErrorResponse, "description": "Bad Request"},
    404: {"model": ErrorResponse, "description": "Artifact Not Found"},
    409: {"model": ErrorResponse, "description": "Model And Graph Do Not Match"},
    422: {"model": ErrorResponse, "description": "Validation Error"},
    500: {"model": ErrorResponse, "description": "Internal Server Error"},
}


@lru_cache(maxsize=1)
def get_inference_service() -> InferenceService:
    return InferenceService()


def _http_error(exc: GTPMException) -> HTTPException:
    if isinstance(exc, ArtifactNotFoundError):
        status_code = 404
    elif isinstance(exc, ArtifactChainError):
        status_code = 409
    elif isinstance(exc, ArtifactError):
        status_code = 500
    elif isinstance(exc, ClassifierError):
        status_code = 422
    else:
        status_code = 400
    logger.error(f"{type(exc).__name__} [{exc.phase}]: {exc}")
    return HTTPException(
        status_code=status_code,
        detail=ErrorResponse(
            error_type=type(exc).__name__,
            message=str(exc),
            details={"phase": exc.phase} if exc.phase else None,
        ).model_dump(),
    )


@router.post(
    "/normalize",
    response_model=NormalizeResponse,
    responses=ERROR_RESPONSES,
    summary="Normalize Text",
    description="Split text into sentences of cleaned, stopword-free, stemmed tokens",
)
async def normalize_text(request: TextRequest, service: InferenceService = Depends(get_inference_service)):
    sentences = service.normalize(request.text)
    return NormalizeResponse(sentences=sentences, tokens=sum(len(sentence) for sentence in sentences))


@router.get(
    "/graph/stats",
    response_model=GraphStatsResponse,
    responses=ERROR_RESPONSES,
    summary="Word Graph Statistics",
    description="Node and edge counts of the loaded word graph with its degree histogram and log-log tail fit",
)
async def graph_stats(
    floor: Optional[int] = Query(None, ge=1, description="Lowest degree included in the tail fit"),
    service: InferenceService = Depends(get_inference_service),
):
    try:
        nodes, edges, histogram = service.graph_stats(floor)
    except GTPMException as e:
        raise _http_error(e)
    return GraphStatsResponse(
        nodes=nodes,
        edges=edges,
        degree_histogram=histogram.bins,
        floor=histogram.floor,
        slope=histogram.slope,
        r_squared=histogram.r_squared,
    )


@router.post(
    "/embed",
    response_model=EmbedResponse,
    responses=ERROR_RESPONSES,
    summary="Embed Text",
    description="Mean transition-probability embedding of a text against the loaded word graph, walked with the loaded model's settings when it has them",
)
async def embed_text(request: EmbedRequest, service: InferenceService = Depends(get_inference_service)):
    if not request.text.strip():
        raise _http_error(EmbeddingError("Text is empty"))
    try:
        config = service.walk_config(request.walk_length)
        vector, _, is_empty = service.embed(request.text, request.walk_length)
    except GTPMException as e:
        raise _http_error(e)
    return EmbedResponse(
        walk_length=config.walk_length,
        walks_per_node=config.walks_per_node,
        seed=config.master_seed,
        dimension=len(vector),
        embedding=vector.tolist(),
        no_known_words=is_empty,
    )


@router.post(
    "/classify",
    response_model=ClassifyResponse,
    responses=ERROR_RESPONSES,
    summary="Classify Text",
    description="Predicted label and per-class scores from the loaded classifier",
)
async def classify_text(request: TextRequest, service: InferenceService = Depends(get_inference_service)):
    if not request.text.strip():
        raise _http_error(EmbeddingError("Text is empty"))
    try:
        label, scores, is_empty = service.classify(request.text)
    except GTPMException as e:
        raise _http_error(e)
    return ClassifyResponse(label=label, scores=scores, no_known_words=is_empty)
