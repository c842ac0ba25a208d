"""Response models for API endpoints."""

from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    """Response model for health check endpoint."""

    status: str = Field(..., description="Overall health status")
    numerics: Dict[str, Any] = Field(..., description="Numerical self-check result")
    database: Dict[str, Any] = Field(..., description="DuckDB availability")
    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class AnalysisResponse(BaseModel):
    """Response model for per-alpha fits and tests."""

    success: bool = Field(..., description="Whether every alpha completed")
    source: str = Field(..., description="Provenance of the sample")
    n: int = Field(..., description="Number of observations used")
    skipped: int = Field(default=0, description="Missing or non-numeric cells skipped")
    hypothesis: Optional[str] = Field(default=None, description="Null hypothesis, for tests")
    outlier_filter: Optional[Dict[str, Any]] = Field(default=None, description="Box-plot filter summary")
    results: List[Dict[str, Any]] = Field(default_factory=list, description="One block per alpha")
    execution_time: float = Field(..., description="Computation time in seconds")


class TableResponse(BaseModel):
    """Response model for ARE and power tables."""

    table: str = Field(..., description="Table kind: are or power")
    alphas: List[float] = Field(..., description="Column alphas")
    rows: List[Dict[str, Any]] = Field(..., description="Table rows")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Grid and policy information")
    execution_time: float = Field(..., description="Computation time in seconds")


class InfluenceResponse(BaseModel):
    """Response model for influence curves."""

    kind: str = Field(..., description="Influence function kind")
    theta: Dict[str, float] = Field(..., description="Evaluation parameter")
    rows: List[Dict[str, Any]] = Field(..., description="Grid point y and one column per curve component")
    execution_time: float = Field(..., description="Computation time in seconds")
