import logging
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.api.v1.endpoints import pipeline
from app.api.v1.endpoints.pipeline import get_inference_service
from app.core.config import Settings, settings
from app.core.logging_config import setup_logging
from app.models.response_models import ErrorResponse
from app.services.inference_service import InferenceService

logger = logging.getLogger(__name__)


async def unhandled_exception_handler(request: Request, exc: Exception):
    """Last-resort handler: log and answer 500 without leaking internals"""
    logger.error(f"Unhandled exception on {request.method} {request.url.path}: {exc}")
    return JSONResponse(
        status_code=500,
        content=ErrorResponse(
            error_type="InternalServerError",
            message="An unexpected error occurred"
        ).model_dump()
    )


def create_app(app_settings: Optional[Settings] = None) -> FastAPI:
    """Build the HTTP service over the graph and model artifacts named in settings"""
    app_settings = app_settings or settings
    setup_logging(app_settings.log_level)

    application = FastAPI(
        title=app_settings.app_name,
        version=app_settings.app_version,
        description="Text embedding and classification with guided transition probability matrices over a word graph",
        debug=app_settings.debug,
    )
    application.add_middleware(
        CORSMiddleware,
        allow_origins=app_settings.get_cors_origins,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    application.include_router(pipeline.router, prefix=app_settings.api_v1_prefix, tags=["Pipeline"])
    application.add_exception_handler(Exception, unhandled_exception_handler)

    @application.get("/", tags=["Root"])
    async def root():
        return {
            "message": f"Welcome to {app_settings.app_name}",
            "version": app_settings.app_version,
            "docs_url": "/docs",
            "health_check": "/health",
            "endpoints": [f"{app_settings.api_v1_prefix}/{name}" for name in ("normalize", "graph/stats", "embed", "classify")],
        }

    @application.get("/health", tags=["Health"])
    async def health_check(service: InferenceService = Depends(get_inference_service)):
        """Service health plus which artifacts are available to load"""
        return {
            "status": "healthy",
            "service": app_settings.app_name,
            "version": app_settings.app_version,
            "artifacts": {
                "graph": Path(service.settings.graph_path).is_file(),
                "model": Path(service.settings.model_path).is_file(),
            },
        }

    return application


app = create_app()


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        "app.main:app",
        host="0.0.0.0",
        port=8000,
        reload=settings.debug,
        log_level="info",
    )
