"""Serialization of fits, tests, tables and simulation reports to JSON and CSV."""

import csv
import io
import json
import logging
import math
from dataclasses import asdict, is_dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from app.exceptions import DataSourceError, ParameterError
from app.models.domain import (
    PARAMETER_NAMES,
    ContaminationScheme,
    FitResult,
    IfCurve,
    IfKind,
    SimulationReport,
    SnParams,
    WaldTestResult,
)
from app.services.asymptotics import AreTable
from app.services.hypothesis import PowerTable

logger = logging.getLogger(__name__)

SIGNIFICANT_DIGITS = 12


def format_number(value: float, digits: int = SIGNIFICANT_DIGITS) -> str:
    """Fixed-significance text form used in CSV cells."""
    return f"{value:.{digits}g}"


def round_significant(value: float, digits: int = SIGNIFICANT_DIGITS) -> Optional[float]:
    """Round to ``digits`` significant digits; non-finite values become None."""
    if not math.isfinite(value):
        return None
    return float(format_number(value, digits))


def to_serializable(value: Any, digits: int = SIGNIFICANT_DIGITS) -> Any:
    """Convert numpy, enum and dataclass values into plain JSON types with rounded floats."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return round_significant(float(value), digits)
    if isinstance(value, np.ndarray):
        return to_serializable(value.tolist(), digits)
    if isinstance(value, dict):
        return {str(k): to_serializable(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_serializable(v, digits) for v in value]
    if is_dataclass(value) and not isinstance(value, type):
        return to_serializable(asdict(value), digits)
    if hasattr(value, "model_dump"):
        return to_serializable(value.model_dump(), digits)
    raise ParameterError(f"cannot serialize value of type {type(value).__name__}")


def render_json(payload: Dict[str, Any], timing: Optional[Dict[str, Any]] = None, digits: int = SIGNIFICANT_DIGITS) -> str:
    """
    JSON document with rounded numbers and ``null`` for non-finite values.

    Wall-clock data goes in a separate ``timing`` object so the rest of the
    document is identical between runs with the same seed.
    """
    document = to_serializable(payload, digits)
    if timing is not None:
        document["timing"] = {
            "generated_at": datetime.now(timezone.utc).isoformat(),
            **to_serializable(timing, digits),
        }
    return json.dumps(document, indent=2, allow_nan=False)


def _cell(value: Any, digits: int) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_number(float(value), digits)
    if isinstance(value, (list, tuple)):
        return ";".join(_cell(v, digits) for v in value)
    return str(value)


def render_csv(rows: Sequence[Dict[str, Any]], digits: int = SIGNIFICANT_DIGITS) -> str:
    """CSV text with the union of row keys as header, in first-seen order."""
    fieldnames: List[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _cell(row.get(key), digits) for key in fieldnames})
    return output.getvalue()


def _write(path: str, text: str) -> None:
    target = Path(path)
    try:
        if target.parent and not target.parent.exists():
            target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    except OSError as e:
        raise DataSourceError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")


def write_json(path: str, payload: Dict[str, Any], timing: Optional[Dict[str, Any]] = None, digits: int = SIGNIFICANT_DIGITS) -> None:
    _write(path, render_json(payload, timing, digits))


def write_csv(path: str, rows: Sequence[Dict[str, Any]], digits: int = SIGNIFICANT_DIGITS) -> None:
    _write(path, render_csv(rows, digits))


def params_record(theta: SnParams) -> Dict[str, float]:
    return theta.as_dict()


def fit_record(fit: FitResult) -> Dict[str, Any]:
    """Full fit block: estimates, standard errors, covariance and optimizer diagnostics."""
    record: Dict[str, Any] = {
        "alpha": fit.alpha,
        "method": fit.method,
        "n": fit.n,
        "params": params_record(fit.params),
        "std_errors": None,
        "covariance": None,
        "objective_value": fit.objective_value,
        "gradient_norm": fit.gradient_norm,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "diverged": fit.diverged,
        "message": fit.message,
        "warnings": list(fit.warnings),
    }
    if fit.std_errors is not None:
        record["std_errors"] = dict(zip(PARAMETER_NAMES, fit.std_errors))
    if fit.covariance is not None:
        record["covariance"] = {
            "sigma": fit.covariance.sigma_matrix,
            "condition_number": fit.covariance.condition_number,
            "marginal": fit.covariance.marginal,
        }
    return record


def fit_row(fit: FitResult, prefix: str = "") -> Dict[str, Any]:
    """One flat row in the estimates (standard errors) layout."""
    row: Dict[str, Any] = {}
    for k, name in enumerate(PARAMETER_NAMES):
        row[f"{prefix}{name}"] = getattr(fit.params, name)
        row[f"{prefix}se_{name}"] = None if fit.std_errors is None else float(fit.std_errors[k])
    row[f"{prefix}converged"] = fit.converged
    row[f"{prefix}iterations"] = fit.iterations
    row[f"{prefix}objective"] = fit.objective_value
    return row


def wald_record(result: WaldTestResult) -> Dict[str, Any]:
    return {
        "alpha": result.alpha,
        "hypothesis": result.hypothesis,
        "statistic": result.statistic,
        "df": result.df,
        "p_value": result.p_value,
        "reject_at": {format_number(level, 6): flag for level, flag in result.reject_at.items()},
        "fit": fit_record(result.fit),
        "warnings": list(result.warnings),
    }


def wald_row(result: WaldTestResult, prefix: str = "") -> Dict[str, Any]:
    """p-value-vs-alpha row ready for plotting."""
    return {
        f"{prefix}statistic": result.statistic,
        f"{prefix}df": result.df,
        f"{prefix}p_value": result.p_value,
    }


def scheme_record(scheme: Optional[ContaminationScheme]) -> Optional[Dict[str, Any]]:
    if scheme is None:
        return None
    return {
        "base": params_record(scheme.base),
        "contaminant": params_record(scheme.contaminant),
        "epsilon": scheme.epsilon,
        "placement": scheme.placement,
    }


def simulation_record(report: SimulationReport) -> Dict[str, Any]:
    """Report metadata and metrics, without the wall-clock runtime."""
    return {
        "design": report.design,
        "n": report.n,
        "replications": report.replications,
        "alpha_grid": report.alpha_grid,
        "scheme": scheme_record(report.scheme),
        "alt_scheme": scheme_record(report.alt_scheme),
        "metrics": report.metrics,
        "failures": {format_number(alpha, 6): count for alpha, count in report.failures.items()},
        "warnings": report.warnings,
        "seeds": report.seeds,
        "settings": report.settings,
    }


def simulation_rows(report: SimulationReport) -> List[Dict[str, Any]]:
    """Metrics rows with the failure count of their alpha appended."""
    return [{**row, "failures": report.failures.get(row["alpha"], 0)} for row in report.metrics]


def _curve_columns(curve: IfCurve) -> Dict[str, np.ndarray]:
    tag = f"a{curve.alpha:g}"
    if curve.kind is IfKind.ESTIMATOR_IF:
        values = np.asarray(curve.values).reshape(-1, 3)
        return {f"if_{name}_{tag}": values[:, k] for k, name in enumerate(PARAMETER_NAMES)}
    column = "if2" if curve.kind is IfKind.TEST_IF2 else "pif"
    return {f"{column}_{tag}": np.asarray(curve.values).reshape(-1)}


def if_curve_rows(curves: Iterable[IfCurve]) -> List[Dict[str, Any]]:
    """Plot-ready rows: the grid point y, then one column per curve component."""
    curves = list(curves)
    if not curves:
        return []
    grid = curves[0].grid
    columns: Dict[str, np.ndarray] = {}
    for curve in curves:
        if curve.grid.shape != grid.shape or not np.array_equal(curve.grid, grid):
            raise ParameterError("influence curves must share one grid")
        columns.update(_curve_columns(curve))
    return [{"y": float(y), **{name: float(col[i]) for name, col in columns.items()}} for i, y in enumerate(grid)]


def are_rows(table: AreTable) -> List[Dict[str, Any]]:
    return table.as_records()


def power_rows(table: PowerTable) -> List[Dict[str, Any]]:
    return table.as_records()
