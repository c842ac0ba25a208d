"""Numerical and I/O services package."""

from app.services.analysis_service import AnalysisService
from app.services.data_service import DataService

__all__ = ["AnalysisService", "DataService"]
