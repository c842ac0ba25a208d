"""Tests for alpha-grid fitting and testing."""

from app.models.domain import Sample
from app.services.analysis_service import AnalysisService
from app.services.hypothesis import parse_hypothesis


def test_fit_grid(settings, skewed_sample):
    analysis = AnalysisService(settings).fit_grid(skewed_sample, [0.0, 0.5])
    assert not analysis.failed
    assert [o.alpha for o in analysis.outcomes] == [0.0, 0.5]
    rows = analysis.as_rows()
    assert rows[0]["converged"] is True
    assert rows[1]["se_gamma"] > 0
    assert analysis.as_record()["n"] == 300


def test_fit_grid_with_filter(settings, skewed_sample):
    analysis = AnalysisService(settings).fit_grid(skewed_sample, [0.5], drop_outliers=True)
    record = analysis.as_record()
    assert record["outlier_filter"]["n_clean"] == 300 - len(record["outlier_filter"]["removed_indices"])
    assert set(record["results"][0]["relative_difference"]) == {"mu", "sigma", "gamma"}


def test_errors_are_recorded_per_alpha(settings):
    analysis = AnalysisService(settings).fit_grid(Sample(values=[2.0] * 10), [0.0, 0.5])
    assert analysis.failed
    assert all("zero variance" in outcome.error for outcome in analysis.outcomes)
    assert [row["error"] is not None for row in analysis.as_rows()] == [True, True]


def test_test_grid(settings, skewed_sample):
    analysis = AnalysisService(settings).test_grid(skewed_sample, [0.5], parse_hypothesis("mu=3"))
    row = analysis.as_rows()[0]
    assert row["df"] == 1
    assert row["p_value"] < 1e-6
    assert analysis.as_record()["hypothesis"] == "mu=3"
