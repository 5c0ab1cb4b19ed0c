"""Descriptive statistics, correlation, least squares and residual checks.

Student-t probabilities come from the regularized incomplete beta function,
evaluated with a modified-Lentz continued fraction.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from mddra.catalog import ValidationError

_EPS = 1e-16
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, 5000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """Two-sided p-value ``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(max(betainc_regularized(df / 2.0, 0.5, x), 0.0), 1.0)


def t_cdf(t: float, df: float) -> float:
    half = 0.5 * t_two_sided_p(t, df)
    return 1.0 - half if t > 0 else half


def t_ppf(q: float, df: float) -> float:
    """Quantile of Student's t by bisection on ``t_cdf``."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    if q == 0.5:
        return 0.0
    lo, hi = -1.0, 1.0
    while t_cdf(lo, df) > q:
        lo *= 2.0
    while t_cdf(hi, df) < q:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class DescriptiveStats:
    mean: float
    standard_error: float
    median: float
    standard_deviation: float
    sample_variance: float
    kurtosis: float | None
    excess_kurtosis: float | None
    skewness: float | None
    range: float
    minimum: float
    maximum: float
    sum: float
    count: int
    confidence_95_halfwidth: float

    def rows(self) -> list[tuple[str, float | int | None]]:
        return [
            ("Mean", self.mean),
            ("Standard Error", self.standard_error),
            ("Median", self.median),
            ("Standard Deviation", self.standard_deviation),
            ("Sample Variance", self.sample_variance),
            ("Kurtosis", self.kurtosis),
            ("Excess Kurtosis", self.excess_kurtosis),
            ("Skewness", self.skewness),
            ("Range", self.range),
            ("Minimum", self.minimum),
            ("Maximum", self.maximum),
            ("Sum", self.sum),
            ("Count", self.count),
            ("Confidence Level (95.0%)", self.confidence_95_halfwidth),
        ]


def _as_vector(sample, name="sample") -> np.ndarray:
    arr = np.asarray(sample, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def descriptive(sample: Sequence[float]) -> DescriptiveStats:
    """Summary statistics; skewness and kurtosis use the population deviation."""
    y = _as_vector(sample)
    n = y.shape[0]
    if n < 2:
        raise ValidationError("descriptive statistics need at least 2 values")
    total = float(np.sum(y))
    mean = total / n
    dev = y - mean
    ss = float(np.sum(dev * dev))
    var = ss / (n - 1)
    sd = math.sqrt(var)
    pop_sd = math.sqrt(ss / n)
    if pop_sd > 0.0:
        skew = float(np.sum(dev**3)) / n / pop_sd**3
        kurt = float(np.sum(dev**4)) / n / pop_sd**4
        excess = kurt - 3.0
    else:
        skew = kurt = excess = None
    se = sd / math.sqrt(n)
    lo, hi = float(y.min()), float(y.max())
    return DescriptiveStats(
        mean=mean,
        standard_error=se,
        median=float(np.median(y)),
        standard_deviation=sd,
        sample_variance=var,
        kurtosis=kurt,
        excess_kurtosis=excess,
        skewness=skew,
        range=hi - lo,
        minimum=lo,
        maximum=hi,
        sum=total,
        count=n,
        confidence_95_halfwidth=t_ppf(0.975, n - 1) * se,
    )


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    a = _as_vector(x, "x")
    b = _as_vector(y, "y")
    if a.shape != b.shape:
        raise ValidationError("x and y must have equal length")
    if a.shape[0] < 2:
        raise ValidationError("correlation needs at least 2 points")
    da = a - a.mean()
    db = b - b.mean()
    sa = float(np.dot(da, da))
    sb = float(np.dot(db, db))
    if sa == 0.0 or sb == 0.0:
        raise ValidationError("correlation is undefined for a constant input")
    r = float(np.dot(da, db)) / math.sqrt(sa * sb)
    return min(max(r, -1.0), 1.0)


def correlation_table(columns: dict[str, Sequence[float]], target: Sequence[float]) -> list[tuple[str, float | None]]:
    """Pearson coefficient of each column against ``target``; None when a column is constant."""
    out = []
    for name, col in columns.items():
        try:
            out.append((name, pearson(col, target)))
        except ValidationError:
            out.append((name, None))
    return out


@dataclass(frozen=True)
class CoefficientRow:
    predictor: str
    estimate: float
    std_error: float
    t_value: float
    p_value: float


@dataclass(frozen=True)
class RegressionFit:
    rows: tuple[CoefficientRow, ...]
    residuals: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    residual_standard_error: float
    r_squared: float
    df: int

    @property
    def estimates(self) -> np.ndarray:
        return np.array([r.estimate for r in self.rows])

    @property
    def std_errors(self) -> np.ndarray:
        return np.array([r.std_error for r in self.rows])

    def row(self, name: str) -> CoefficientRow:
        for r in self.rows:
            if r.predictor == name:
                return r
        raise KeyError(name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["predictor", "Estimated", "Std Error", "T-Value", "P-Value"])
        for r in self.rows:
            w.writerow([r.predictor, repr(r.estimate), repr(r.std_error), repr(r.t_value), repr(r.p_value)])
        return buf.getvalue()


INTERCEPT = "Intercept"


def ols_fit(X, y, fit_intercept: bool = True, names: Sequence[str] | None = None) -> RegressionFit:
    """Ordinary least squares via Householder QR.

    The intercept, when fitted, is reported as the last row.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    yv = _as_vector(y, "y")
    if not np.all(np.isfinite(X)):
        raise ValidationError("design matrix contains non-finite values")
    n, p = X.shape
    if yv.shape[0] != n:
        raise ValidationError("X and y have different numbers of rows")
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(p)]
    if len(names) != p:
        raise ValidationError("one name per predictor column is required")
    design = np.hstack([X, np.ones((n, 1))]) if fit_intercept else X
    q = design.shape[1]
    if n <= q:
        raise ValidationError(f"need more observations ({n}) than fitted coefficients ({q})")
    Q, R = np.linalg.qr(design)
    diag = np.abs(np.diag(R))
    if diag.min() <= max(n, q) * np.finfo(float).eps * diag.max():
        raise ValidationError("design matrix is rank deficient")
    beta = np.linalg.solve(R, Q.T @ yv)
    fitted = design @ beta
    resid = yv - fitted
    rss = float(resid @ resid)
    df = n - q
    sigma2 = rss / df
    r_inv = np.linalg.solve(R, np.eye(q))
    cov_diag = np.einsum("ij,ij->i", r_inv, r_inv)
    se = np.sqrt(sigma2 * cov_diag)
    if fit_intercept:
        centred = yv - yv.mean()
        tss = float(centred @ centred)
    else:
        tss = float(yv @ yv)
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")
    labels = names + ([INTERCEPT] if fit_intercept else [])
    rows = []
    for name, b, s in zip(labels, beta, se):
        t = float(b / s) if s > 0 else (math.copysign(math.inf, b) if b != 0 else math.nan)
        rows.append(CoefficientRow(name, float(b), float(s), t, t_two_sided_p(t, df)))
    return RegressionFit(tuple(rows), resid, fitted, math.sqrt(sigma2), r2, df)


def l2_loss(y: Sequence[float], y_hat: Sequence[float]) -> float:
    a = _as_vector(y, "y")
    b = _as_vector(y_hat, "y_hat")
    if a.shape != b.shape:
        raise ValidationError("y and y_hat must have equal length")
    d = a - b
    return float(d @ d)


@dataclass(frozen=True)
class CrossCorrelation:
    input: str
    r: float
    passed: bool


def residual_cross_correlation(
    residuals: Sequence[float],
    inputs,
    threshold: float = 0.1,
    names: Sequence[str] | None = None,
) -> list[CrossCorrelation]:
    """Pearson coefficient of the residuals against each input column.

    A column passes when ``|r| <= threshold``. Constant input columns are
    reported with ``r = 0``.
    """
    e = _as_vector(residuals, "residuals")
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != e.shape[0]:
        raise ValidationError("residuals and inputs must have the same length")
    if np.all(e == e[0]):
        raise ValidationError("residuals are constant; correlation is undefined")
    names = list(names) if names is not None else [f"x{i + 1}" for i in range(X.shape[1])]
    out = []
    for name, col in zip(names, X.T):
        if np.all(col == col[0]):
            r = 0.0
        else:
            r = pearson(e, col)
        out.append(CrossCorrelation(name, r, abs(r) <= threshold))
    return out


def gammainc_upper_regularized(a: float, x: float) -> float:
    """``Q(a, x) = Gamma(a, x) / Gamma(a)`` by series below ``a + 1``, Lentz continued fraction above."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be >= 0")
    if x == 0.0:
        return 1.0
    log_front = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        term = total = 1.0 / a
        ap = a
        for _ in range(10000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                return max(0.0, 1.0 - total * math.exp(log_front))
        raise ArithmeticError("incomplete gamma series did not converge")
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(log_front) * h
    raise ArithmeticError("incomplete gamma continued fraction did not converge")


def chi2_sf(x: float, df: float) -> float:
    """Upper tail of the chi-square distribution."""
    if x <= 0:
        return 1.0
    return gammainc_upper_regularized(df / 2.0, x / 2.0)
