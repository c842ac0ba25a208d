"""Data service for reading sample columns from CSV files through DuckDB."""

import csv
import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple

import duckdb

from app.exceptions import DataError, DataSourceError
from app.models.domain import Sample

logger = logging.getLogger(__name__)

MIN_NUMERIC_ROWS = 5


class DataService:
    """
    Service for CSV ingestion.

    Files are scanned with DuckDB's ``read_csv`` as text and converted with
    ``TRY_CAST``, so blank and non-numeric cells become NULL and are skipped
    instead of failing the whole read.
    """

    def __init__(self, database_path: str = ":memory:"):
        """
        Initialize data service.

        Args:
            database_path: DuckDB database to run scans in (in-memory by default)
        """
        self.database_path = database_path
        self._connection: Optional[duckdb.DuckDBPyConnection] = None

    def _get_connection(self) -> duckdb.DuckDBPyConnection:
        """Get or create database connection."""
        if self._connection is None:
            self._connection = duckdb.connect(self.database_path)
            logger.debug(f"Opened DuckDB connection: {self.database_path}")
        return self._connection

    def columns(self, path: str) -> List[str]:
        """Header names of a CSV file."""
        self._require_file(path)
        try:
            with open(path, newline="", encoding="utf-8-sig") as handle:
                header = next(csv.reader(handle), None)
        except (OSError, UnicodeDecodeError, csv.Error) as e:
            raise DataSourceError(f"cannot read {path}: {e}") from e
        if not header:
            raise DataError(f"{path} has no header row")
        return [name.strip() for name in header]

    @staticmethod
    def _require_file(path: str) -> None:
        if not Path(path).is_file():
            raise DataSourceError(f"input file not found: {path}")

    def ingest_csv(self, path: str, column: str) -> Tuple[Sample, int]:
        """
        Read one numeric column in file order.

        Args:
            path: CSV file with a header row
            column: Header name of the column to read

        Returns:
            Tuple of (sample, number of skipped cells)

        Raises:
            DataSourceError: If the file or the column does not exist
            DataError: If fewer than 5 numeric values remain
        """
        available = self.columns(path)
        if column not in available:
            raise DataSourceError(f"column '{column}' not found in {path} (columns: {', '.join(available)})")

        quoted = '"' + column.replace('"', '""') + '"'
        query = f"SELECT TRY_CAST({quoted} AS DOUBLE) FROM read_csv(?, header=true, all_varchar=true)"
        try:
            rows = self._get_connection().execute(query, [str(path)]).fetchall()
        except duckdb.Error as e:
            logger.error(f"CSV scan failed for {path}: {e}")
            raise DataError(f"cannot read column '{column}' from {path}: {e}") from e

        values = [row[0] for row in rows if row[0] is not None and math.isfinite(row[0])]
        skipped = len(rows) - len(values)
        if len(values) < MIN_NUMERIC_ROWS:
            raise DataError(
                f"column '{column}' in {path} has {len(values)} numeric values; at least {MIN_NUMERIC_ROWS} are needed"
            )
        if skipped:
            logger.warning(f"Skipped {skipped} missing or non-numeric cells in {path}:{column}")
        logger.info(f"Loaded {len(values)} values from {path}:{column}")
        return Sample(values=values, label=column, source=f"{path}:{column}"), skipped

    def close(self):
        """Close database connection."""
        if self._connection:
            self._connection.close()
            self._connection = None
            logger.debug("DuckDB connection closed")
