"""FastAPI dependency injection for services."""

import logging
from typing import Generator

from fastapi import HTTPException

from app.config import get_settings
from app.exceptions import SnRobustError
from app.services.analysis_service import AnalysisService
from app.services.data_service import DataService

logger = logging.getLogger(__name__)

# Singleton instances
_analysis_service: AnalysisService | None = None


def get_analysis_service() -> AnalysisService:
    """
    Get or create the AnalysisService singleton.

    The service only holds configuration, so one instance serves every request.
    """
    global _analysis_service

    if _analysis_service is None:
        _analysis_service = AnalysisService(get_settings())
        logger.info("AnalysisService singleton created")

    return _analysis_service


def get_data_service() -> Generator[DataService, None, None]:
    """
    Get DataService instance.

    Yields a data service and ensures its DuckDB connection is closed on request completion.
    """
    service = DataService()
    try:
        yield service
    finally:
        service.close()


def to_http_error(error: SnRobustError) -> HTTPException:
    """Usage and data errors are the client's (400); numerical failures are ours (500)."""
    status_code = 400 if error.exit_code in (1, 2) else 500
    return HTTPException(status_code=status_code, detail=str(error))


def cleanup_services():
    """Clean up all singleton services."""
    global _analysis_service

    if _analysis_service:
        _analysis_service = None
        logger.info("AnalysisService cleaned up")
