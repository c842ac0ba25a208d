"""Pydantic models package."""

from app.models.requests import Command, InfluenceRequest, ParamsModel, RunConfig
from app.models.responses import (
    AnalysisResponse,
    HealthResponse,
    InfluenceResponse,
    TableResponse,
)

__all__ = [
    "Command",
    "InfluenceRequest",
    "ParamsModel",
    "RunConfig",
    "AnalysisResponse",
    "HealthResponse",
    "InfluenceResponse",
    "TableResponse",
]
