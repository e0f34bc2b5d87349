"""Logistic regression and model selection for the project-outcome analysis.

Binomial logistic regression is fitted by iteratively reweighted least
squares (Newton-Raphson on the Bernoulli log-likelihood) with step halving.
Inference uses two-sided Wald z-tests from the inverse Fisher information.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

INTERCEPT = "(Intercept)"
MAX_ITER = 50
TOL = 1e-8
# coefficients beyond this magnitude indicate (quasi-)separation
SEPARATION_BOUND = 15.0


class StatsError(ValueError):
    pass


class DegenerateOutcomeError(StatsError):
    pass


class RankDeficientError(StatsError):
    pass


def standard_normal_cdf(z: float) -> float:
    """Phi(z) from the complementary error function of the C library.

    ``0.5 * erfc(-z / sqrt(2))`` keeps full relative precision in both
    tails (absolute error well below 1e-15).
    """
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def wald_p_value(z: float) -> float:
    """Two-sided p-value 2 * (1 - Phi(|z|))."""
    if math.isnan(z):
        return float("nan")
    return math.erfc(abs(z) / math.sqrt(2.0))


def quantile(sorted_values: Sequence[float], q: float) -> float:
    """Linear interpolation between order statistics at 1-based position 1 + (n - 1) q."""
    n = len(sorted_values)
    if n == 0:
        raise StatsError("quantile of empty sequence")
    h = (n - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, n - 1)
    return sorted_values[lo] + (h - lo) * (sorted_values[hi] - sorted_values[lo])


def tukey_fences(values: Sequence[float], k: float = 1.5) -> tuple[float, float]:
    s = sorted(values)
    q1, q3 = quantile(s, 0.25), quantile(s, 0.75)
    iqr = q3 - q1
    return q1 - k * iqr, q3 + k * iqr


def remove_outliers_iqr(values: Sequence[float], k: float = 1.5) -> tuple[list[float], list[float]]:
    """Split values into (kept, removed) around the Tukey fences; input order preserved.

    Values exactly on a fence are kept.
    """
    if len(values) == 0:
        raise StatsError("cannot remove outliers from an empty list")
    if not all(math.isfinite(v) for v in values):
        raise StatsError("values must be finite")
    lo, hi = tukey_fences(values, k)
    kept = [v for v in values if lo <= v <= hi]
    removed = [v for v in values if v < lo or v > hi]
    return kept, removed


@dataclass(frozen=True)
class DesignMatrix:
    """Predictor columns (intercept implicit) and a binary outcome."""

    columns: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(len(self.y), len(self.columns))
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "columns", tuple(self.columns))
        if len(set(self.columns)) != len(self.columns):
            raise StatsError("duplicate column names")
        if not np.all((y == 0) | (y == 1)):
            raise StatsError("outcome must be binary 0/1")
        if not np.all(np.isfinite(X)):
            raise StatsError("design contains non-finite values")
        if len(y) < len(self.columns) + 1:
            raise StatsError(f"{len(y)} observations cannot support {len(self.columns)} predictors plus intercept")

    @classmethod
    def from_records(
        cls,
        records: Sequence[Mapping[str, Optional[float]]],
        outcomes: Sequence[int],
        columns: Sequence[str],
    ) -> "DesignMatrix":
        """Build from per-row mappings, dropping rows with a missing (None) predictor."""
        X, y, dropped = [], [], 0
        for rec, out in zip(records, outcomes):
            vals = [rec.get(c) for c in columns]
            if any(v is None or (isinstance(v, float) and math.isnan(v)) for v in vals):
                dropped += 1
                continue
            X.append([float(v) for v in vals])
            y.append(out)
        if dropped:
            logger.info("dropped %d row(s) with missing predictors for %s", dropped, list(columns))
        return cls(tuple(columns), np.array(X, dtype=float).reshape(len(y), len(columns)), np.array(y), dropped)

    @property
    def n(self) -> int:
        return len(self.y)

    def with_intercept(self) -> np.ndarray:
        return np.column_stack([np.ones(self.n), self.X])

    def subset(self, columns: Sequence[str]) -> "DesignMatrix":
        idx = [self.columns.index(c) for c in columns]
        return DesignMatrix(tuple(columns), self.X[:, idx], self.y, self.dropped)


@dataclass(frozen=True)
class RegressionFit:
    columns: tuple[str, ...]
    coefficients: tuple[float, ...]
    standard_errors: tuple[float, ...]
    z_values: tuple[float, ...]
    p_values: tuple[float, ...]
    log_likelihood: float
    aic: float
    n_obs: int
    converged: bool
    iterations: int

    @property
    def k(self) -> int:
        return len(self.coefficients)

    def coef(self, name: str) -> float:
        return self.coefficients[self.columns.index(name)]

    def p_value(self, name: str) -> float:
        return self.p_values[self.columns.index(name)]

    def to_json(self) -> dict:
        return {
            "columns": list(self.columns),
            "coefficients": list(self.coefficients),
            "standard_errors": list(self.standard_errors),
            "z_values": list(self.z_values),
            "p_values": list(self.p_values),
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "n_obs": self.n_obs,
            "converged": self.converged,
            "iterations": self.iterations,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RegressionFit":
        return cls(
            columns=tuple(d["columns"]),
            coefficients=tuple(d["coefficients"]),
            standard_errors=tuple(d["standard_errors"]),
            z_values=tuple(d["z_values"]),
            p_values=tuple(d["p_values"]),
            log_likelihood=d["log_likelihood"],
            aic=d["aic"],
            n_obs=d["n_obs"],
            converged=d["converged"],
            iterations=d["iterations"],
        )


def log_likelihood(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -eta))


def collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    """Columns that add nothing to the rank of the columns before them."""
    bad = []
    kept: list[int] = []
    for j in range(X.shape[1]):
        trial = kept + [j]
        if np.linalg.matrix_rank(X[:, trial]) == len(trial):
            kept = trial
        else:
            bad.append(names[j])
    return bad


def fit_logistic(design: DesignMatrix) -> RegressionFit:
    X = design.with_intercept()
    y = design.y
    names = (INTERCEPT,) + design.columns
    n, k = X.shape
    if n == 0 or np.all(y == y[0]):
        raise DegenerateOutcomeError("outcome has a single class; logistic regression is undefined")
    bad = collinear_columns(X, names)
    if bad:
        raise RankDeficientError(f"design is rank deficient; collinear column(s): {', '.join(bad)}")

    beta = np.zeros(k)
    ll = log_likelihood(X, y, beta)
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        p = _sigmoid(X @ beta)
        w = p * (1.0 - p)
        grad = X.T @ (y - p)
        info = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = beta + t * step
            ll_cand = log_likelihood(X, y, cand)
            if ll_cand >= ll - 1e-12 * max(1.0, abs(ll)) or t < 1e-10:
                break
            t *= 0.5
        delta = cand - beta
        beta, ll = cand, ll_cand
        if np.max(np.abs(delta)) < TOL:
            converged = True
            break

    p = _sigmoid(X @ beta)
    info = X.T @ (X * (p * (1.0 - p))[:, None])
    try:
        cov = np.linalg.inv(info)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        se = np.full(k, np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = beta / se
    if np.any(np.abs(beta) > SEPARATION_BOUND):
        logger.warning("possible (quasi-)separation in fit of %s; estimates unreliable", list(design.columns))
        converged = False
    elif not converged:
        logger.warning("IRLS did not converge in %d iterations for %s", MAX_ITER, list(design.columns))

    return RegressionFit(
        columns=names,
        coefficients=tuple(float(b) for b in beta),
        standard_errors=tuple(float(s) for s in se),
        z_values=tuple(float(v) for v in z),
        p_values=tuple(wald_p_value(float(v)) for v in z),
        log_likelihood=ll,
        aic=2.0 * k - 2.0 * ll,
        n_obs=n,
        converged=converged,
        iterations=it,
    )


def null_fit(design: DesignMatrix) -> RegressionFit:
    return fit_logistic(design.subset(()))


def mcfadden_r2(fit: RegressionFit, null: RegressionFit) -> float:
    if null.log_likelihood == 0.0:
        raise StatsError("null model log-likelihood is 0; McFadden R^2 undefined")
    r2 = 1.0 - fit.log_likelihood / null.log_likelihood
    if -1e-12 < r2 < 0.0:
        r2 = 0.0
    return r2


def significance_code(p: float) -> str:
    if not 0.0 <= p <= 1.0:
        raise StatsError(f"p-value outside [0, 1]: {p!r}")
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


SIGNIF_LEGEND = "Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1"


@dataclass(frozen=True)
class StepwiseStep:
    columns: tuple[str, ...]
    aic: float
    dropped: Optional[str] = None


@dataclass(frozen=True)
class StepwiseTrace:
    steps: tuple[StepwiseStep, ...]
    final: RegressionFit
    candidates: tuple[tuple[tuple[str, float], ...], ...] = field(default=())

    @property
    def aics(self) -> list[float]:
        return [s.aic for s in self.steps]

    def to_json(self) -> dict:
        return {
            "steps": [{"columns": list(s.columns), "aic": s.aic, "dropped": s.dropped} for s in self.steps],
            "candidates": [[{"drop": c, "aic": a} for c, a in round_] for round_ in self.candidates],
            "final": self.final.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "StepwiseTrace":
        return cls(
            steps=tuple(StepwiseStep(tuple(s["columns"]), s["aic"], s.get("dropped")) for s in d["steps"]),
            final=RegressionFit.from_json(d["final"]),
            candidates=tuple(tuple((c["drop"], c["aic"]) for c in r) for r in d.get("candidates", [])),
        )


def backward_stepwise(design: DesignMatrix) -> StepwiseTrace:
    """Drop predictors one at a time while that strictly lowers AIC.

    Each round refits every one-column-smaller model and keeps the one with
    the lowest AIC (ties go to the alphabetically first dropped column).
    The intercept is never dropped.
    """
    current = list(design.columns)
    fit = fit_logistic(design)
    steps = [StepwiseStep(tuple(current), fit.aic)]
    rounds = []
    while current:
        cands = []
        for col in sorted(current):
            cols = [c for c in current if c != col]
            cands.append((fit_logistic(design.subset(cols)), col, cols))
        rounds.append(tuple((col, f.aic) for f, col, _ in cands))
        best, col, cols = min(cands, key=lambda t: (t[0].aic, t[1]))
        if not best.aic < fit.aic:
            break
        current, fit = cols, best
        steps.append(StepwiseStep(tuple(cols), best.aic, col))
    return StepwiseTrace(tuple(steps), fit, tuple(rounds))
