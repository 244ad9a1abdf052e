from typing import Literal

from pydantic import BaseModel, Field, field_validator

MAX_MESSAGE_BYTES = 64 * 1024


class ClassifyRequest(BaseModel):
    message: str
    task: Literal["binary", "multiclass"] = "binary"

    @field_validator("message")
    @classmethod
    def _not_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("message must not be empty")
        return v


class ClassifyResponse(BaseModel):
    label: str
    scores: dict[str, float]
    matched_patterns: list[str] = Field(default_factory=list)
    model_id: str


class Health(BaseModel):
    status: str = "ok"
    models: list[str]


class ErrorBody(BaseModel):
    detail: str
