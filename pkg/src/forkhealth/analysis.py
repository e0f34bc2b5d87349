"""Outlier cleaning, per-metric logistic fits and full-model stepwise selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .model import BINARY_METRICS, METRIC_FIELDS, AnalysisRow
from .stats import (
    INTERCEPT,
    DegenerateOutcomeError,
    DesignMatrix,
    RegressionFit,
    StatsError,
    StepwiseTrace,
    backward_stepwise,
    collinear_columns,
    fit_logistic,
    mcfadden_r2,
    remove_outliers_iqr,
    tukey_fences,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CleaningReport:
    metric: str
    n_present: int
    n_removed: int
    lower_fence: Optional[float]
    upper_fence: Optional[float]


def clean_outliers(
    rows: Sequence[AnalysisRow], metrics: Sequence[str] = METRIC_FIELDS
) -> tuple[list[AnalysisRow], list[CleaningReport]]:
    """Mark Tukey-fence outliers MISSING, per metric, over the pooled rows.

    Binary metrics are left untouched.
    """
    cleaned = list(rows)
    reports = []
    for m in metrics:
        present = [r.metrics.get(m) for r in rows if r.metrics.get(m) is not None]
        if m in BINARY_METRICS or not present:
            reports.append(CleaningReport(m, len(present), 0, None, None))
            continue
        _, removed = remove_outliers_iqr(present)
        lo, hi = tukey_fences(present)
        for i, r in enumerate(cleaned):
            v = r.metrics.get(m)
            if v is not None and (v < lo or v > hi):
                cleaned[i] = AnalysisRow(replace(r.metrics, **{m: None}), r.outcome)
        reports.append(CleaningReport(m, len(present), len(removed), lo, hi))
    return cleaned, reports


@dataclass(frozen=True)
class UnivariateResult:
    metric: str
    fit: Optional[RegressionFit]
    null_fit: Optional[RegressionFit]
    mcfadden_r2: Optional[float]
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "fit": self.fit.to_json() if self.fit else None,
            "null_fit": self.null_fit.to_json() if self.null_fit else None,
            "mcfadden_r2": self.mcfadden_r2,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, d: dict) -> "UnivariateResult":
        return cls(
            metric=d["metric"],
            fit=RegressionFit.from_json(d["fit"]) if d.get("fit") else None,
            null_fit=RegressionFit.from_json(d["null_fit"]) if d.get("null_fit") else None,
            mcfadden_r2=d.get("mcfadden_r2"),
            error=d.get("error"),
        )


def _design(rows: Sequence[AnalysisRow], columns: Sequence[str]) -> DesignMatrix:
    return DesignMatrix.from_records(
        [{c: r.metrics.get(c) for c in columns} for r in rows], [r.outcome for r in rows], columns
    )


def univariate(rows: Sequence[AnalysisRow], metric: str) -> UnivariateResult:
    try:
        design = _design(rows, [metric])
        fit = fit_logistic(design)
        null = fit_logistic(design.subset(()))
        return UnivariateResult(metric, fit, null, mcfadden_r2(fit, null))
    except StatsError as exc:
        logger.warning("univariate fit for %s failed: %s", metric, exc)
        return UnivariateResult(metric, None, None, None, str(exc))


@dataclass(frozen=True)
class AnalysisResult:
    n_rows: int
    cleaning: tuple[CleaningReport, ...]
    univariate: tuple[UnivariateResult, ...]
    stepwise: Optional[StepwiseTrace]
    stepwise_excluded: tuple[str, ...] = ()
    stepwise_error: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "cleaning": [vars(c) for c in self.cleaning],
            "univariate": [u.to_json() for u in self.univariate],
            "stepwise": self.stepwise.to_json() if self.stepwise else None,
            "stepwise_excluded": list(self.stepwise_excluded),
            "stepwise_error": self.stepwise_error,
        }

    @classmethod
    def from_json(cls, d: dict) -> "AnalysisResult":
        return cls(
            n_rows=d["n_rows"],
            cleaning=tuple(CleaningReport(**c) for c in d["cleaning"]),
            univariate=tuple(UnivariateResult.from_json(u) for u in d["univariate"]),
            stepwise=StepwiseTrace.from_json(d["stepwise"]) if d.get("stepwise") else None,
            stepwise_excluded=tuple(d.get("stepwise_excluded", ())),
            stepwise_error=d.get("stepwise_error"),
        )


def full_model_stepwise(
    rows: Sequence[AnalysisRow], metrics: Sequence[str] = METRIC_FIELDS
) -> tuple[Optional[StepwiseTrace], tuple[str, ...], Optional[str]]:
    """Backward stepwise from all metrics on the complete cleaned rows.

    Columns that are constant or collinear on those rows cannot enter the
    full model and are excluded up front.
    """
    try:
        design = _design(rows, metrics)
    except StatsError as exc:
        logger.warning("full model not estimable: %s", exc)
        return None, (), str(exc)
    bad = collinear_columns(design.with_intercept(), (INTERCEPT,) + design.columns)
    if bad:
        logger.warning("excluding collinear/constant column(s) from the full model: %s", ", ".join(bad))
        design = design.subset([c for c in design.columns if c not in bad])
    try:
        return backward_stepwise(design), tuple(bad), None
    except StatsError as exc:
        logger.warning("stepwise selection failed: %s", exc)
        return None, tuple(bad), str(exc)


def run_analysis(rows: Sequence[AnalysisRow], metrics: Sequence[str] = METRIC_FIELDS) -> AnalysisResult:
    """Cleaning, univariate fits and stepwise selection.

    Raises DegenerateOutcomeError when the rows hold fewer than two outcome classes.
    """
    if len({r.outcome for r in rows}) < 2:
        raise DegenerateOutcomeError(
            f"analysis needs both graduated and retired projects; got {len(rows)} row(s) "
            f"with outcome(s) {sorted({r.outcome for r in rows})}"
        )
    cleaned, reports = clean_outliers(rows, metrics)
    uni = tuple(univariate(cleaned, m) for m in metrics)
    trace, excluded, err = full_model_stepwise(cleaned, metrics)
    return AnalysisResult(len(rows), tuple(reports), uni, trace, excluded, err)
