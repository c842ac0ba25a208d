"""Tests for CSV ingestion through DuckDB."""

import numpy as np
import pytest

from app.exceptions import DataError, DataSourceError
from app.services.data_service import DataService


@pytest.fixture
def service():
    service = DataService()
    yield service
    service.close()


def test_reads_named_column_in_order(service, csv_path, skewed_sample):
    sample, skipped = service.ingest_csv(str(csv_path), "value")
    assert skipped == 0
    assert sample.label == "value"
    assert sample.source == f"{csv_path}:value"
    np.testing.assert_array_equal(sample.values, skewed_sample.values)


def test_columns(service, csv_path):
    assert service.columns(str(csv_path)) == ["id", "value"]


def test_blank_and_text_cells_skipped(service, tmp_path):
    path = tmp_path / "gaps.csv"
    path.write_text("id,x\n1,0.5\n2,\n3,1.5\n4,n/a\n5,2.5\n6,3.5\n7,\n8,4.5\n")
    sample, skipped = service.ingest_csv(str(path), "x")
    assert skipped == 3
    np.testing.assert_array_equal(sample.values, [0.5, 1.5, 2.5, 3.5, 4.5])


def test_too_few_values(service, tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("x\n1\n2\n3\n")
    with pytest.raises(DataError):
        service.ingest_csv(str(path), "x")


def test_header_only(service, tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("a,b\n")
    with pytest.raises(DataError):
        service.ingest_csv(str(path), "b")


def test_missing_file(service, tmp_path):
    with pytest.raises(DataSourceError):
        service.ingest_csv(str(tmp_path / "nope.csv"), "x")


def test_missing_column(service, csv_path):
    with pytest.raises(DataSourceError) as excinfo:
        service.ingest_csv(str(csv_path), "weight")
    assert "value" in str(excinfo.value)


def test_connection_reused_and_closed(csv_path):
    service = DataService()
    service.ingest_csv(str(csv_path), "value")
    first = service._connection
    service.ingest_csv(str(csv_path), "value")
    assert service._connection is first
    service.close()
    assert service._connection is None
