"""Text, CSV and JSON renderings of the analysis tables and metric distributions."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .analysis import AnalysisResult, UnivariateResult
from .model import BINARY_METRICS, METRIC_FIELDS, METRIC_LABELS, MetricVector, ProjectStatus
from .stats import INTERCEPT, SIGNIF_LEGEND, StepwiseTrace, quantile, significance_code

FORMATS = ("text", "csv", "json")
DEFAULT_BINS = 20


def fmt_estimate(x: Optional[float]) -> str:
    return "NA" if x is None or math.isnan(x) else f"{x:.4f}"


def fmt_p(p: Optional[float]) -> str:
    return "NA" if p is None or math.isnan(p) else f"{p:.6g}"


def _code(p: Optional[float]) -> str:
    return "" if p is None or math.isnan(p) else significance_code(p)


def _p_with_code(p: Optional[float]) -> str:
    return f"{fmt_p(p)} {_code(p)}".rstrip()


def _label(metric: str) -> str:
    return METRIC_LABELS.get(metric, metric)


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n"


def _text_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in header]
    for r in rows:
        widths = [max(w, len(c)) for w, c in zip(widths, r)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x: Optional[float]):
    """Full-precision cell for CSV; empty for missing."""
    return "" if x is None else repr(float(x))


# --- univariate (logistic regression summary) ------------------------------


@dataclass(frozen=True)
class UnivariateReportRow:
    metric_name: str
    intercept_estimate: Optional[float]
    intercept_p: Optional[float]
    slope_estimate: Optional[float]
    slope_p: Optional[float]
    signif_code: str
    mcfadden_r2: Optional[float]

    def __post_init__(self):
        if self.signif_code != _code(self.slope_p):
            raise ValueError(f"significance code {self.signif_code!r} disagrees with p={self.slope_p}")

    @classmethod
    def build(cls, metric_name, intercept_estimate, intercept_p, slope_estimate, slope_p, mcfadden_r2):
        return cls(metric_name, intercept_estimate, intercept_p, slope_estimate, slope_p, _code(slope_p), mcfadden_r2)

    @classmethod
    def from_result(cls, res: UnivariateResult) -> "UnivariateReportRow":
        if res.fit is None:
            return cls.build(res.metric, None, None, None, None, None)
        fit = res.fit
        slope = fit.columns[1]
        return cls.build(
            res.metric, fit.coef(INTERCEPT), fit.p_value(INTERCEPT), fit.coef(slope), fit.p_value(slope), res.mcfadden_r2
        )


UNIVARIATE_COLUMNS = (
    "metric", "intercept_estimate", "intercept_p", "slope_estimate", "slope_p", "signif_code", "mcfadden_r2",
)


def univariate_table(rows: Sequence[UnivariateReportRow], format: str = "text", paper_layout: bool = False) -> str:
    if format == "json":
        return _json_dump(
            [
                {
                    "metric": r.metric_name,
                    "intercept_estimate": r.intercept_estimate,
                    "intercept_p": r.intercept_p,
                    "slope_estimate": r.slope_estimate,
                    "slope_p": r.slope_p,
                    "signif_code": r.signif_code,
                    "mcfadden_r2": r.mcfadden_r2,
                }
                for r in rows
            ]
        )
    if format == "csv":
        return _csv(
            UNIVARIATE_COLUMNS,
            [
                [r.metric_name, _num(r.intercept_estimate), _num(r.intercept_p), _num(r.slope_estimate),
                 _num(r.slope_p), r.signif_code, _num(r.mcfadden_r2)]
                for r in rows
            ],
        )
    if format != "text":
        raise ValueError(f"unknown format {format!r}")

    if paper_layout:
        body = []
        for r in rows:
            body.append([INTERCEPT, fmt_estimate(r.intercept_estimate), _p_with_code(r.intercept_p)])
            body.append([_label(r.metric_name), fmt_estimate(r.slope_estimate), _p_with_code(r.slope_p)])
        table = _text_table(["Coefficients", "Estimate", "p-value"], body)
        r2 = _text_table(
            ["Metrics", "McFadden's pseudo-R2"],
            [[_label(r.metric_name), fmt_p(r.mcfadden_r2)] for r in rows],
        )
        return "Logistic Regression Summary\n" + table + SIGNIF_LEGEND + "\n\n" + r2

    body = [
        [_label(r.metric_name), fmt_estimate(r.intercept_estimate), fmt_p(r.intercept_p),
         fmt_estimate(r.slope_estimate), fmt_p(r.slope_p), r.signif_code, fmt_p(r.mcfadden_r2)]
        for r in rows
    ]
    header = ["Metric", "Intercept", "Intercept p", "Estimate", "p-value", "Signif", "McFadden R2"]
    return "Logistic Regression Summary\n" + _text_table(header, body) + SIGNIF_LEGEND + "\n"


# --- stepwise ----------------------------------------------------------------


STEPWISE_COLUMNS = ("section", "step", "term", "estimate", "std_error", "p_value", "signif_code", "aic")


def stepwise_table(trace: StepwiseTrace, format: str = "text") -> str:
    fit = trace.final
    coefs = [
        (name, fit.coefficients[i], fit.standard_errors[i], fit.p_values[i])
        for i, name in enumerate(fit.columns)
    ]
    if format == "json":
        return _json_dump(
            {
                "coefficients": [
                    {"term": n, "estimate": b, "std_error": s, "p_value": p, "signif_code": _code(p)}
                    for n, b, s, p in coefs
                ],
                "aic": fit.aic,
                "log_likelihood": fit.log_likelihood,
                "n_obs": fit.n_obs,
                "steps": [
                    {"step": i, "dropped": s.dropped, "columns": list(s.columns), "aic": s.aic}
                    for i, s in enumerate(trace.steps)
                ],
            }
        )
    if format == "csv":
        rows = [["coefficient", "", n, _num(b), _num(s), _num(p), _code(p), ""] for n, b, s, p in coefs]
        rows += [
            ["step", str(i), s.dropped or "", "", "", "", "", _num(s.aic)] for i, s in enumerate(trace.steps)
        ]
        return _csv(STEPWISE_COLUMNS, rows)
    if format != "text":
        raise ValueError(f"unknown format {format!r}")

    body = [
        [n if n == INTERCEPT else _label(n), fmt_estimate(b), fmt_estimate(s), _p_with_code(p)]
        for n, b, s, p in coefs
    ]
    out = "stepAIC Summary\n" + _text_table(["Coefficients", "Estimate", "Std. Error", "p-value"], body)
    out += SIGNIF_LEGEND + "\n\nElimination steps\n"
    steps = [
        [str(i), "(full model)" if s.dropped is None else "- " + s.dropped, f"{s.aic:.4f}"]
        for i, s in enumerate(trace.steps)
    ]
    return out + _text_table(["Step", "Change", "AIC"], steps)


# --- distributions -----------------------------------------------------------


GROUPS = ("graduated", "retired", "pooled")


@dataclass(frozen=True)
class DistributionSummary:
    metric_name: str
    group: str
    n: int
    five_number: Optional[tuple[float, float, float, float, float]]
    histogram: tuple[tuple[float, float, int], ...]
    stage: str = "cleaned"

    @property
    def empty(self) -> bool:
        return self.n == 0

    def to_json(self) -> dict:
        return {
            "metric": self.metric_name,
            "stage": self.stage,
            "group": self.group,
            "n": self.n,
            "empty": self.empty,
            "five_number": list(self.five_number) if self.five_number else None,
            "histogram": [{"lower": lo, "upper": hi, "count": c} for lo, hi, c in self.histogram],
        }


def five_number(values: Sequence[float]) -> tuple[float, float, float, float, float]:
    s = sorted(values)
    return (s[0], quantile(s, 0.25), quantile(s, 0.5), quantile(s, 0.75), s[-1])


def histogram(values: Sequence[float], bins: int) -> tuple[tuple[float, float, int], ...]:
    """Equal-width bins over [min, max]; the last bin is closed. A constant sample is one bin."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    lo, hi = min(values), max(values)
    if lo == hi:
        return ((lo, hi, len(values)),)
    width = (hi - lo) / bins
    edges = [lo + i * width for i in range(bins)] + [hi]
    counts = [0] * bins
    for v in values:
        idx = min(int((v - lo) / width), bins - 1)
        # guard float rounding at interior edges
        while idx > 0 and v < edges[idx]:
            idx -= 1
        while idx < bins - 1 and v >= edges[idx + 1]:
            idx += 1
        counts[idx] += 1
    return tuple((edges[i], edges[i + 1], counts[i]) for i in range(bins))


def _binary_histogram(values: Sequence[float]) -> tuple[tuple[float, float, int], ...]:
    zeros = sum(1 for v in values if v == 0)
    return ((0.0, 0.5, zeros), (0.5, 1.0, len(values) - zeros))


def distribution_summaries(
    metrics: Sequence[MetricVector],
    bins: int = DEFAULT_BINS,
    stage: str = "cleaned",
    metric_names: Sequence[str] = METRIC_FIELDS,
) -> list[DistributionSummary]:
    """Five-number summaries and histograms per metric for graduated, retired and pooled projects."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    out = []
    for m in metric_names:
        for group in GROUPS:
            if group == "pooled":
                members = [v for v in metrics if v.status in (ProjectStatus.GRADUATED, ProjectStatus.RETIRED)]
            else:
                members = [v for v in metrics if v.status is not None and v.status.value == group]
            values = [float(v.get(m)) for v in members if v.get(m) is not None]
            if not values:
                out.append(DistributionSummary(m, group, 0, None, (), stage))
            elif m in BINARY_METRICS:
                out.append(DistributionSummary(m, group, len(values), None, _binary_histogram(values), stage))
            else:
                out.append(DistributionSummary(m, group, len(values), five_number(values), histogram(values, bins), stage))
    return out


DISTRIBUTION_COLUMNS = (
    "metric", "stage", "group", "n", "min", "q1", "median", "q3", "max", "bin", "bin_lower", "bin_upper", "bin_count",
)


def distributions_document(summaries: Sequence[DistributionSummary], format: str = "csv") -> str:
    if format == "json":
        return _json_dump([s.to_json() for s in summaries])
    if format != "csv":
        raise ValueError(f"unknown format {format!r}")
    rows = []
    for s in summaries:
        five = [_num(x) for x in s.five_number] if s.five_number else [""] * 5
        head = [s.metric_name, s.stage, s.group, str(s.n), *five]
        if not s.histogram:
            rows.append(head + ["", "", "", ""])
        for i, (lo, hi, c) in enumerate(s.histogram):
            rows.append(head + [str(i), _num(lo), _num(hi), str(c)])
    return _csv(DISTRIBUTION_COLUMNS, rows)


# --- whole-run documents -----------------------------------------------------


def render_reports(
    result: AnalysisResult,
    raw: Sequence[MetricVector],
    cleaned: Sequence[MetricVector],
    bins: int = DEFAULT_BINS,
    paper_layout: bool = False,
) -> dict[str, str]:
    """All report documents of one analysis run, keyed by file name."""
    rows = [UnivariateReportRow.from_result(u) for u in result.univariate]
    docs = {f"univariate_summary.{ext}": univariate_table(rows, fmt, paper_layout) for fmt, ext in
            (("text", "txt"), ("csv", "csv"), ("json", "json"))}
    if result.stepwise is not None:
        for fmt, ext in (("text", "txt"), ("csv", "csv"), ("json", "json")):
            docs[f"stepwise_summary.{ext}"] = stepwise_table(result.stepwise, fmt)
    else:
        msg = result.stepwise_error or "stepwise selection not run"
        docs["stepwise_summary.txt"] = f"stepAIC Summary\nnot available: {msg}\n"
        docs["stepwise_summary.csv"] = _csv(STEPWISE_COLUMNS, [])
        docs["stepwise_summary.json"] = _json_dump({"error": msg})
    summaries = distribution_summaries(raw, bins, "raw") + distribution_summaries(cleaned, bins, "cleaned")
    docs["distributions.csv"] = distributions_document(summaries, "csv")
    docs["distributions.json"] = distributions_document(summaries, "json")
    return docs
