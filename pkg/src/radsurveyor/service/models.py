"""Pydantic request/response models for the mission HTTP API."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class PolygonPayload(BaseModel):
    envelope: list[tuple[float, float]] = Field(min_length=3)
    holes: list[list[tuple[float, float]]] = Field(default_factory=list)


class StateResponse(BaseModel):
    stage: str
    version: int
    artifacts: dict[str, list[str]]
    pending_inputs: list[str]
    stale_stages: list[str]
    operator_inputs: dict[str, bool]


class MutationResponse(BaseModel):
    stage: str
    version: int


class ObstaclesRequest(BaseModel):
    version: int
    polygons: list[PolygonPayload]


class UnloadPointsRequest(BaseModel):
    version: int
    points: list[tuple[float, float]] = Field(min_length=1)


class SweepDirRequest(BaseModel):
    version: int
    mode: Literal["auto", "fixed"] = "auto"
    radians: Optional[float] = None


class ValidateObstaclesRequest(BaseModel):
    version: int
    confirmed: bool = True


class AdvanceRequest(BaseModel):
    version: int
    force: bool = False


class ErrorBody(BaseModel):
    code: str
    message: str
