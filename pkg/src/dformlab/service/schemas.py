"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from ..config import RunConfig


class RunRequest(BaseModel):
    """Submit one experiment run."""

    model_config = ConfigDict(extra="forbid")

    config: RunConfig
    name: str = ""


class RunSummary(BaseModel):
    """One line in the run listing."""

    id: str
    name: str
    kind: str
    status: Literal["completed", "failed"]


class RunRecord(BaseModel):
    """Full description of a finished run."""

    id: str
    name: str
    kind: str
    status: Literal["completed", "failed"]
    failure: Literal["", "numerical"] = ""
    detail: str = ""
    summary: dict[str, Any] = Field(default_factory=dict)
    files: list[str] = Field(default_factory=list)

    def listing(self) -> RunSummary:
        return RunSummary(id=self.id, name=self.name, kind=self.kind, status=self.status)


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str
