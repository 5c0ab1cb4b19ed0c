import math

import numpy as np
import pytest

from mddra.catalog import ValidationError
from mddra.stats import (
    INTERCEPT,
    betainc_regularized,
    chi2_sf,
    correlation_table,
    descriptive,
    l2_loss,
    ols_fit,
    pearson,
    residual_cross_correlation,
    t_cdf,
    t_ppf,
    t_two_sided_p,
)

import oracles

# (t, df) pairs spanning tiny, moderate and heavy-tail regimes
T_POINTS = [
    (0.0, 1), (0.5, 1), (1.0, 2), (2.0, 3), (-2.5, 4),
    (1.96, 5), (3.0, 7), (0.25, 10), (-1.3, 12), (2.228, 10),
    (4.5, 15), (1.0, 20), (-2.086, 20), (6.0, 30), (0.8, 50),
    (2.6, 100), (10.0, 8), (1.5, 0.5), (3.3, 2.5), (12.0, 200),
]


@pytest.mark.parametrize("t,df", T_POINTS)
def test_t_p_values_match_high_precision(t, df):
    assert abs(t_two_sided_p(t, df) - oracles.t_two_sided_p(t, df)) < 1e-9


def test_p_values_monotone_in_abs_t():
    for df in (1, 4, 30):
        ps = [t_two_sided_p(t, df) for t in np.linspace(0, 20, 81)]
        assert all(0.0 <= p <= 1.0 for p in ps)
        assert all(a >= b for a, b in zip(ps, ps[1:]))
    assert t_two_sided_p(0.0, 5) == 1.0
    assert t_two_sided_p(-2.0, 5) == t_two_sided_p(2.0, 5)


def test_t_ppf_inverts_cdf():
    for df in (1, 3, 9, 60):
        for q in (0.6, 0.9, 0.975, 0.999):
            assert t_cdf(t_ppf(q, df), df) == pytest.approx(q, abs=1e-12)
    assert t_ppf(0.975, 10) == pytest.approx(2.2281388519649385, abs=1e-10)


def test_incomplete_functions_edges():
    assert betainc_regularized(2.0, 3.0, 0.0) == 0.0
    assert betainc_regularized(2.0, 3.0, 1.0) == 1.0
    # I_x(1, 1) is the identity
    assert betainc_regularized(1.0, 1.0, 0.3) == pytest.approx(0.3, abs=1e-15)
    # chi-square with 2 df has survival exp(-x/2)
    for x in (0.1, 1.0, 5.0, 40.0):
        assert chi2_sf(x, 2) == pytest.approx(math.exp(-x / 2), rel=1e-12)
    assert chi2_sf(0.0, 3) == 1.0


def test_descriptive_examples():
    d = descriptive([1, 2, 3])
    assert d.mean == 2 and d.median == 2 and d.skewness == 0
    d = descriptive([-1.0, 1.0] * 50)
    assert d.kurtosis == 1.0
    assert d.excess_kurtosis == -2.0
    assert descriptive([1, 2, 3, 4]).median == 2.5
    c = descriptive([4.0] * 7)
    assert c.sample_variance == 0.0
    assert c.skewness is None and c.kurtosis is None and c.excess_kurtosis is None
    with pytest.raises(ValidationError):
        descriptive([1.0])
    with pytest.raises(ValidationError):
        descriptive([1.0, math.nan])


def test_descriptive_invariants():
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = rng.gamma(2.0, 3.0, size=int(rng.integers(2, 300)))
        d = descriptive(x)
        assert d.range == d.maximum - d.minimum
        assert d.standard_error == pytest.approx(d.standard_deviation / math.sqrt(d.count), rel=1e-15)
        assert d.sample_variance == pytest.approx(d.standard_deviation**2, rel=1e-12)
        assert d.excess_kurtosis == d.kurtosis - 3.0


def test_skewness_of_symmetric_samples_vanishes():
    rng = np.random.default_rng(7)
    for _ in range(20):
        half = rng.normal(3.0, 2.0, size=500)
        centre = rng.normal()
        x = np.concatenate([centre + half, centre - half])
        assert abs(descriptive(x).skewness) < 1e-12


def test_mean_and_variance_match_compensated_oracle():
    rng = np.random.default_rng(11)
    x = rng.normal(1e4, 3.0, size=100_000)
    mean = math.fsum(x) / x.size
    var = math.fsum((v - mean) ** 2 for v in x) / (x.size - 1)
    d = descriptive(x)
    assert d.mean == pytest.approx(mean, rel=1e-12)
    assert d.sample_variance == pytest.approx(var, rel=1e-12)


def test_confidence_halfwidth():
    d = descriptive([2.0, 4.0, 6.0, 8.0])
    assert d.confidence_95_halfwidth == pytest.approx(t_ppf(0.975, 3) * d.standard_error, rel=1e-15)


def test_pearson_examples_and_properties():
    x = np.arange(10.0)
    assert pearson(x, 3 * x + 2) == 1.0
    assert pearson(x, -x) == -1.0
    rng = np.random.default_rng(0)
    a, b = rng.random(10_000), rng.random(10_000)
    assert abs(pearson(a, b)) < 0.05
    c = rng.normal(size=50)
    d = c + rng.normal(size=50)
    r = pearson(c, d)
    assert pearson(d, c) == pytest.approx(r, abs=1e-15)
    assert pearson(4 * c - 1, 0.5 * d + 9) == pytest.approx(r, abs=1e-13)
    with pytest.raises(ValidationError):
        pearson([1, 1, 1], [1, 2, 3])
    table = correlation_table({"c": c, "flat": np.ones(50)}, d)
    assert table[0][1] == pytest.approx(r) and table[1] == ("flat", None)


def test_ols_matches_normal_equation_oracle():
    rng = np.random.default_rng(21)
    for trial in range(50):
        n = int(rng.integers(15, 60))
        p = int(rng.integers(1, 5))
        X = rng.normal(size=(n, p))
        y = X @ rng.normal(size=p) + 0.7 + rng.normal(scale=0.5, size=n)
        intercept = trial % 5 != 0
        fit = ols_fit(X, y, fit_intercept=intercept)
        beta, se = oracles.ols_normal_equations(X, y, intercept=intercept)
        assert np.max(np.abs(fit.estimates - beta)) < 1e-8
        assert np.max(np.abs(fit.std_errors - se)) < 1e-8
        design = np.hstack([X, np.ones((n, 1))]) if intercept else X
        assert np.max(np.abs(design.T @ fit.residuals)) < 1e-8
        for row in fit.rows:
            assert row.t_value == row.estimate / row.std_error
        if intercept:
            assert abs(fit.residuals.sum()) < 1e-9


def test_ols_examples():
    x = np.arange(10.0)
    fit = ols_fit(x, 2 * x + 1)
    assert fit.row("x1").estimate == pytest.approx(2.0, abs=1e-12)
    assert fit.row(INTERCEPT).estimate == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(fit.residuals)) < 1e-12

    # centred predictor orthogonal to a centred response
    z = np.array([-1.0, 1.0, -1.0, 1.0])
    w = np.array([1.0, 1.0, -1.0, -1.0])
    fit = ols_fit(z, w)
    assert abs(fit.row("x1").estimate) < 1e-15
    assert fit.row("x1").p_value == pytest.approx(1.0, abs=1e-12)

    rng = np.random.default_rng(5)
    X = rng.normal(size=(200, 2))
    y = 0.5 * X[:, 0] - 0.2 * X[:, 1] + rng.normal(scale=0.3, size=200)
    fit = ols_fit(X, y, names=["x1", "x2"])
    for name, truth in (("x1", 0.5), ("x2", -0.2)):
        r = fit.row(name)
        assert abs(r.estimate - truth) < 3 * r.std_error


def test_ols_errors():
    with pytest.raises(ValidationError):
        ols_fit(np.ones((5, 1)), np.arange(5.0))
    x = np.arange(6.0)
    with pytest.raises(ValidationError):
        ols_fit(np.column_stack([x, 2 * x]), x)
    with pytest.raises(ValidationError):
        ols_fit(np.arange(2.0), np.arange(2.0))


def test_l2_loss():
    assert l2_loss([1, 2], [1, 2]) == 0.0
    assert l2_loss([0, 0], [1, 1]) == 2.0
    y = np.array([1.0, 2.0, 3.0])
    h = np.array([1.5, 1.0, 3.25])
    assert l2_loss(y, y + 3 * (h - y)) == pytest.approx(9 * l2_loss(y, h), rel=1e-14)
    with pytest.raises(ValidationError):
        l2_loss([1], [1, 2])


def test_residual_cross_correlation():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(300, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + rng.normal(size=300)
    fit = ols_fit(X, y)
    report = residual_cross_correlation(fit.residuals, X)
    assert all(abs(c.r) < 1e-8 and c.passed for c in report)

    x = np.linspace(-2, 2, 200)
    bad = ols_fit(x, x**2)
    report = residual_cross_correlation(bad.residuals, (x**2)[:, None], names=["x2"])
    assert abs(report[0].r) > 0.9 and not report[0].passed
    assert residual_cross_correlation(bad.residuals, (x**2)[:, None], threshold=1.0)[0].passed
    with pytest.raises(ValidationError):
        residual_cross_correlation(np.zeros(5), np.arange(5.0))
