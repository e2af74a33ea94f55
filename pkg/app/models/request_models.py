from typing import Optional

from pydantic import BaseModel, Field


class TextRequest(BaseModel):
    text: str = Field(..., description="Raw document text")


class EmbedRequest(TextRequest):
    walk_length: Optional[int] = Field(
        default=None,
        ge=1,
        le=64,
        description="Walk length m; defaults to the configured walk_length",
    )
