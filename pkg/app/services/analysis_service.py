"""Per-alpha fitting and testing of one data column, shared by the CLI and the API."""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from app.config import Settings
from app.exceptions import SnRobustError
from app.models.domain import PARAMETER_NAMES, FitResult, HypothesisSpec, Sample, WaldTestResult
from app.services import report_service
from app.services.estimation import fit_ga, fit_gd, fit_mle
from app.services.hypothesis import wald_test
from app.services.montecarlo import OutlierFilterResult, outlier_filter_boxplot, relative_difference

logger = logging.getLogger(__name__)


@dataclass
class AlphaOutcome:
    """Result for one alpha; ``error`` is set instead of the results when it failed."""

    alpha: float
    fit: Optional[FitResult] = None
    clean_fit: Optional[FitResult] = None
    rd: Optional[np.ndarray] = None
    test: Optional[WaldTestResult] = None
    clean_test: Optional[WaldTestResult] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        if self.error is not None:
            return True
        fits = [f for f in (self.fit, self.clean_fit) if f is not None]
        fits += [t.fit for t in (self.test, self.clean_test) if t is not None]
        return not all(f.converged for f in fits)


@dataclass
class GridAnalysis:
    sample: Sample
    outcomes: List[AlphaOutcome] = field(default_factory=list)
    filtered: Optional[OutlierFilterResult] = None
    hypothesis: Optional[str] = None
    skipped: int = 0
    runtime_seconds: float = 0.0

    @property
    def failed(self) -> bool:
        return any(outcome.failed for outcome in self.outcomes)

    def as_record(self) -> Dict[str, Any]:
        """JSON payload: data provenance, filter summary and one block per alpha."""
        record: Dict[str, Any] = {
            "source": self.sample.source,
            "label": self.sample.label,
            "n": self.sample.n,
            "skipped": self.skipped,
        }
        if self.hypothesis is not None:
            record["hypothesis"] = self.hypothesis
        if self.filtered is not None:
            record["outlier_filter"] = {
                "removed_indices": list(self.filtered.removed_indices),
                "lower_fence": self.filtered.lower_fence,
                "upper_fence": self.filtered.upper_fence,
                "n_clean": self.filtered.sample.n,
            }
        blocks = []
        for outcome in self.outcomes:
            block: Dict[str, Any] = {"alpha": outcome.alpha, "error": outcome.error}
            if outcome.fit is not None:
                block["fit"] = report_service.fit_record(outcome.fit)
            if outcome.clean_fit is not None:
                block["clean_fit"] = report_service.fit_record(outcome.clean_fit)
            if outcome.rd is not None:
                block["relative_difference"] = dict(zip(PARAMETER_NAMES, outcome.rd))
            if outcome.test is not None:
                block["test"] = report_service.wald_record(outcome.test)
            if outcome.clean_test is not None:
                block["clean_test"] = report_service.wald_record(outcome.clean_test)
            blocks.append(block)
        record["results"] = blocks
        return record

    def as_rows(self) -> List[Dict[str, Any]]:
        """CSV rows, one per alpha (estimates and SEs, or p-values for tests)."""
        rows = []
        for outcome in self.outcomes:
            row: Dict[str, Any] = {"alpha": outcome.alpha}
            if outcome.test is not None:
                row.update(report_service.wald_row(outcome.test))
                if outcome.clean_test is not None:
                    row.update(report_service.wald_row(outcome.clean_test, prefix="clean_"))
            else:
                if outcome.fit is not None:
                    row.update(report_service.fit_row(outcome.fit))
                if outcome.clean_fit is not None:
                    row.update(report_service.fit_row(outcome.clean_fit, prefix="clean_"))
                if outcome.rd is not None:
                    row.update({f"rd_{name}": value for name, value in zip(PARAMETER_NAMES, outcome.rd)})
            row["error"] = outcome.error
            rows.append(row)
        return rows


class AnalysisService:
    """
    Service for alpha-grid analyses of a single sample.

    Each alpha runs independently: a failure is recorded on its outcome and
    the remaining alphas still run.
    """

    def __init__(self, settings: Settings):
        self.settings = settings
        self.quad = settings.quadrature_spec()
        self.gd_cfg = settings.gd_config()

    def _fit(self, sample: Sample, alpha: float, optimizer: str = "gd", seed: int = 0) -> FitResult:
        if optimizer == "ga":
            return fit_ga(
                sample,
                alpha,
                self.settings.ga_config(rng_seed=seed),
                self.quad,
                self.settings.trunc_halfwidth,
                self.settings.singular_policy,
            )
        if alpha == 0:
            return fit_mle(sample, self.gd_cfg, None, self.quad, self.settings.trunc_halfwidth, self.settings.singular_policy)
        return fit_gd(sample, alpha, self.gd_cfg, None, self.quad, self.settings.trunc_halfwidth, self.settings.singular_policy)

    def _test(self, sample: Sample, alpha: float, hyp: HypothesisSpec) -> WaldTestResult:
        return wald_test(
            sample,
            alpha,
            hyp,
            self.gd_cfg,
            self.quad,
            self.settings.trunc_halfwidth,
            singular_policy=self.settings.singular_policy,
        )

    def fit_grid(
        self,
        sample: Sample,
        alphas: Sequence[float],
        drop_outliers: bool = False,
        optimizer: str = "gd",
        seed: int = 0,
    ) -> GridAnalysis:
        """
        Fit every alpha (alpha = 0 by maximum likelihood).

        Args:
            sample: Data to fit
            alphas: Tuning parameters, each >= 0
            drop_outliers: Also fit the box-plot-filtered sample and report relative differences
            optimizer: "gd" for gradient descent (MLE at alpha = 0) or "ga" for the genetic algorithm
            seed: Genetic-algorithm seed

        Returns:
            GridAnalysis with one outcome per alpha
        """
        started = time.time()
        analysis = GridAnalysis(sample=sample)
        if drop_outliers:
            analysis.filtered = outlier_filter_boxplot(sample)

        for alpha in alphas:
            outcome = AlphaOutcome(alpha=float(alpha))
            try:
                outcome.fit = self._fit(sample, outcome.alpha, optimizer, seed)
                if analysis.filtered is not None:
                    outcome.clean_fit = self._fit(analysis.filtered.sample, outcome.alpha, optimizer, seed)
                    outcome.rd = relative_difference(outcome.fit, outcome.clean_fit)
            except SnRobustError as e:
                logger.error(f"Fit at alpha={alpha:g} failed: {e}")
                outcome.error = str(e)
            analysis.outcomes.append(outcome)

        analysis.runtime_seconds = time.time() - started
        return analysis

    def test_grid(
        self,
        sample: Sample,
        alphas: Sequence[float],
        hyp: HypothesisSpec,
        drop_outliers: bool = False,
    ) -> GridAnalysis:
        """Wald-type test of ``hyp`` at every alpha, optionally repeated on the filtered sample."""
        started = time.time()
        analysis = GridAnalysis(sample=sample, hypothesis=hyp.description)
        if drop_outliers:
            analysis.filtered = outlier_filter_boxplot(sample)

        for alpha in alphas:
            outcome = AlphaOutcome(alpha=float(alpha))
            try:
                outcome.test = self._test(sample, outcome.alpha, hyp)
                if analysis.filtered is not None:
                    outcome.clean_test = self._test(analysis.filtered.sample, outcome.alpha, hyp)
            except SnRobustError as e:
                logger.error(f"Test of {hyp.description} at alpha={alpha:g} failed: {e}")
                outcome.error = str(e)
            analysis.outcomes.append(outcome)

        analysis.runtime_seconds = time.time() - started
        return analysis
