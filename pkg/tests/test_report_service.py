"""Tests for JSON and CSV rendering."""

import csv
import io
import json
import math

import numpy as np
import pytest

from app.exceptions import DataSourceError, ParameterError
from app.models.domain import FitMethod, IfCurve, IfKind, SnParams
from app.services import report_service

THETA = SnParams(0.0, 1.0, 1.0)


def _curve(kind: IfKind, alpha: float, grid, values) -> IfCurve:
    return IfCurve(alpha=alpha, at_theta=THETA, grid=np.asarray(grid, dtype=float), values=np.asarray(values), kind=kind)


class TestNumbers:
    def test_format_number(self):
        assert report_service.format_number(1.0 / 3.0) == "0.333333333333"
        assert report_service.format_number(123456789.123456789, 6) == "1.23457e+08"

    def test_round_significant(self):
        assert report_service.round_significant(2.0 / 3.0, 4) == 0.6667
        assert report_service.round_significant(math.nan) is None
        assert report_service.round_significant(math.inf) is None

    def test_to_serializable(self):
        value = {
            "method": FitMethod.MLE,
            "array": np.array([1.0, np.nan]),
            "flag": np.bool_(True),
            "count": np.int64(3),
            "theta": THETA,
        }
        assert report_service.to_serializable(value) == {
            "method": "mle",
            "array": [1.0, None],
            "flag": True,
            "count": 3,
            "theta": {"mu": 0.0, "sigma": 1.0, "gamma": 1.0},
        }

    def test_unserializable(self):
        with pytest.raises(ParameterError):
            report_service.to_serializable(object())


class TestJson:
    def test_timing_kept_apart(self):
        document = json.loads(report_service.render_json({"a": 1.5, "b": math.inf}, {"runtime_seconds": 0.25}))
        assert document["a"] == 1.5
        assert document["b"] is None
        assert document["timing"]["runtime_seconds"] == 0.25
        assert "generated_at" in document["timing"]

    def test_without_timing(self):
        assert "timing" not in json.loads(report_service.render_json({"a": 1}))

    def test_write_json(self, tmp_path):
        target = tmp_path / "out" / "report.json"
        report_service.write_json(str(target), {"x": [1, 2]})
        assert json.loads(target.read_text()) == {"x": [1, 2]}

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(DataSourceError):
            report_service.write_json(str(blocker / "report.json"), {})


class TestCsv:
    def test_round_trip(self):
        rows = [
            {"alpha": 0.0, "mu": 0.1, "converged": True},
            {"alpha": 0.5, "mu": math.nan, "error": "diverged", "warnings": ["a", "b"]},
        ]
        parsed = list(csv.DictReader(io.StringIO(report_service.render_csv(rows))))
        assert list(parsed[0]) == ["alpha", "mu", "converged", "error", "warnings"]
        assert parsed[0]["converged"] == "true"
        assert parsed[0]["error"] == ""
        assert parsed[1]["mu"] == "nan"
        assert parsed[1]["warnings"] == "a;b"


class TestCurveRows:
    def test_column_names(self):
        grid = [-1.0, 0.0, 1.0]
        curves = [
            _curve(IfKind.ESTIMATOR_IF, 0.0, grid, np.arange(9.0).reshape(3, 3)),
            _curve(IfKind.ESTIMATOR_IF, 0.5, grid, np.zeros((3, 3))),
        ]
        rows = report_service.if_curve_rows(curves)
        assert list(rows[0]) == [
            "y", "if_mu_a0", "if_sigma_a0", "if_gamma_a0", "if_mu_a0.5", "if_sigma_a0.5", "if_gamma_a0.5",
        ]
        assert rows[2]["if_gamma_a0"] == 8.0

    def test_test_curves(self):
        rows = report_service.if_curve_rows([
            _curve(IfKind.TEST_IF2, 0.1, [0.0, 1.0], [0.0, 2.0]),
            _curve(IfKind.TEST_PIF, 0.1, [0.0, 1.0], [0.3, 0.4]),
        ])
        assert rows[1] == {"y": 1.0, "if2_a0.1": 2.0, "pif_a0.1": 0.4}

    def test_grids_must_match(self):
        with pytest.raises(ParameterError):
            report_service.if_curve_rows([
                _curve(IfKind.TEST_IF2, 0.0, [0.0, 1.0], [0.0, 0.0]),
                _curve(IfKind.TEST_IF2, 0.5, [0.0, 2.0], [0.0, 0.0]),
            ])

    def test_no_curves(self):
        assert report_service.if_curve_rows([]) == []
