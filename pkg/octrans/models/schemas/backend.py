"""Evaluation backend schemas."""

from enum import Enum

from pydantic import BaseModel, Field


class BackendKind(str, Enum):
    """Supported evaluation backends."""

    SERIAL = "serial"
    PARALLEL = "parallel"
    ACCELERATOR = "accelerator"


class BackendConfig(BaseModel):
    """Backend selection."""

    kind: BackendKind = Field(default=BackendKind.SERIAL, description="Backend kind")
    workers: int = Field(default=1, ge=1, description="Worker threads (parallel)")
    chunk_size: int = Field(
        default=512, ge=1, description="Grid indices per task, fixed per run"
    )
