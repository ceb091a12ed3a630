"""Performance statistics for monthly portfolio return series.

Student-t tail probabilities are computed here from the regularized
incomplete beta function rather than borrowed from a statistics package, so
the p-values can be checked against direct integration of the t density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import InputError, UndefinedMeasureError
from .months import format_month
from .series import ReturnSeries

SeriesLike = Union[ReturnSeries, Sequence[float], np.ndarray]

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 100_000


def _values(x: SeriesLike) -> np.ndarray:
    if isinstance(x, ReturnSeries):
        return x.values
    return np.asarray(x, dtype=float).reshape(-1)


def _check_aligned(a: SeriesLike, b: SeriesLike) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(a, ReturnSeries) and isinstance(b, ReturnSeries) and not a.same_months(b):
        raise InputError(
            f"series cover different months: {format_month(a.start)}..{format_month(a.end)} "
            f"vs {format_month(b.start)}..{format_month(b.end)}")
    va, vb = _values(a), _values(b)
    if len(va) != len(vb):
        raise InputError(f"series lengths differ ({len(va)} vs {len(vb)})")
    return va, vb


# --------------------------------------------------------------------------- special functions

def _beta_cf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(x: float, a: float, b: float, y: Optional[float] = None) -> float:
    """``I_x(a, b)`` for ``a, b > 0`` and ``0 <= x <= 1``.

    ``y`` may supply ``1 - x`` when the caller can form it without
    cancellation.
    """
    if a <= 0 or b <= 0:
        raise InputError("incomplete beta needs positive shape parameters")
    if not 0.0 <= x <= 1.0:
        raise InputError(f"incomplete beta argument must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if y is None:
        y = 1.0 - x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, y) / b


def student_t_two_tailed(t: float, dof: float) -> float:
    """``P(|T| >= |t|)`` for a Student-t variable with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise InputError("degrees of freedom must be positive")
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    if t == 0.0:
        return 1.0
    t2 = t * t
    x, y = dof / (dof + t2), t2 / (dof + t2)
    return min(1.0, max(0.0, regularized_incomplete_beta(x, dof / 2.0, 0.5, y)))


def student_t_cdf(t: float, dof: float) -> float:
    tail = 0.5 * student_t_two_tailed(t, dof)
    return 1.0 - tail if t > 0 else tail


# --------------------------------------------------------------------------- return measures

def annualized_return(series: SeriesLike) -> float:
    """Geometric average annual return of a monthly series.

    ``prod(1 + r_j) ** (12 / M) - 1``; a month at -1 wipes the series out and
    the result is -1.
    """
    r = _values(series)
    if len(r) == 0:
        raise InputError("annualized return of an empty series")
    if np.any(r <= -1.0):
        return -1.0
    return math.expm1(12.0 / len(r) * math.fsum(np.log1p(r)))


def sharpe_ratio(series: SeriesLike, risk_free: SeriesLike, annualize: bool = False) -> float:
    """Mean monthly excess return over its sample standard deviation.

    With ``annualize`` the monthly figure is scaled by ``sqrt(12)``.
    """
    r, rf = _check_aligned(series, risk_free)
    excess = r - rf
    if len(excess) < 2:
        raise InputError("Sharpe ratio needs at least two observations")
    sd = float(np.std(excess, ddof=1))
    if sd == 0.0 or not math.isfinite(sd):
        raise UndefinedMeasureError("Sharpe ratio undefined for zero excess-return dispersion")
    ratio = float(np.mean(excess)) / sd
    return ratio * math.sqrt(12.0) if annualize else ratio


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    dof: int
    mean_diff: float


def paired_t_test(a: SeriesLike, b: SeriesLike) -> TTestResult:
    """Two-tailed paired t-test of ``mean(a - b) == 0``.

    A zero-dispersion difference gives ``t = 0, p = 1`` when its mean is zero
    and an infinite ``t`` with ``p = 0`` otherwise.
    """
    va, vb = _check_aligned(a, b)
    n = len(va)
    if n < 2:
        raise InputError("paired t-test needs at least two observations")
    d = va - vb
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    dof = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, dof, 0.0)
        return TTestResult(math.copysign(math.inf, mean), 0.0, dof, mean)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, student_t_two_tailed(t, dof), dof, mean)


# --------------------------------------------------------------------------- regression

@dataclass(frozen=True)
class OLSResult:
    names: Tuple[str, ...]
    coef: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    r_squared: float
    residual_dof: int
    residuals: np.ndarray
    fitted: np.ndarray


def collinear_columns(X: np.ndarray, tol: Optional[float] = None) -> list:
    """Indices of columns that add nothing to the span of the earlier ones."""
    out, rank = [], 0
    for j in range(X.shape[1]):
        r = np.linalg.matrix_rank(X[:, : j + 1], tol=tol)
        if r == rank:
            out.append(j)
        rank = r
    return out


def ols(y: np.ndarray, X: np.ndarray, names: Sequence[str]) -> OLSResult:
    """Least squares with classical (homoskedastic) standard errors.

    ``X`` should include an intercept column if one is wanted; R-squared is
    measured about the mean of ``y``.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if n <= k:
        raise InputError(f"need more observations ({n}) than regressors ({k})")
    bad = collinear_columns(X)
    if bad:
        raise InputError("design matrix is rank deficient; collinear columns: "
                         + ", ".join(names[j] for j in bad))
    q, r = np.linalg.qr(X)
    coef = np.linalg.solve(r, q.T @ y)
    fitted = X @ coef
    resid = y - fitted
    dof = n - k
    sigma2 = float(resid @ resid) / dof
    r_inv = np.linalg.inv(r)
    xtx_inv_diag = np.sum(r_inv * r_inv, axis=1)
    se = np.sqrt(sigma2 * xtx_inv_diag)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / se
    ss_res = float(resid @ resid)
    centred = y - y.mean()
    ss_tot = float(centred @ centred)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return OLSResult(tuple(names), coef, se, t, min(1.0, max(0.0, r2)), dof, resid, fitted)


@dataclass(frozen=True)
class RegressionResult:
    """Three-factor regression of monthly portfolio excess returns."""

    alpha: float
    beta_market: float
    beta_hml: float
    beta_smb: float
    t_stats: Tuple[float, float, float, float]
    std_errors: Tuple[float, float, float, float]
    r_squared: float
    residual_dof: int

    @property
    def coefficients(self) -> Tuple[float, float, float, float]:
        return (self.alpha, self.beta_market, self.beta_hml, self.beta_smb)


def factor_design(series: ReturnSeries, factors: Mapping[int, object]):
    """Excess returns and the ``[1, mkt - rf, hml, smb]`` design for ``series``' months."""
    missing = [m for m in series.months if m not in factors]
    if missing:
        raise InputError(f"factor data missing for {len(missing)} months, first "
                         f"{format_month(missing[0])}")
    rows = [factors[m] for m in series.months]
    rf = np.array([f.risk_free for f in rows])
    X = np.column_stack([
        np.ones(len(rows)),
        np.array([f.market_return for f in rows]) - rf,
        np.array([f.hml for f in rows]),
        np.array([f.smb for f in rows]),
    ])
    return series.values - rf, X


def ols_three_factor(series: ReturnSeries, factors: Mapping[int, object]) -> RegressionResult:
    """Regress excess returns on market excess return, HML and SMB.

    ``factors`` maps month keys to records with ``market_return``,
    ``risk_free``, ``hml`` and ``smb`` attributes.
    """
    if len(series) < 5:
        raise InputError("three-factor regression needs at least five observations")
    y, X = factor_design(series, factors)
    fit = ols(y, X, ("alpha", "market", "hml", "smb"))
    c, se, t = fit.coef, fit.std_errors, fit.t_stats
    return RegressionResult(
        alpha=float(c[0]), beta_market=float(c[1]), beta_hml=float(c[2]), beta_smb=float(c[3]),
        t_stats=tuple(float(v) for v in t), std_errors=tuple(float(v) for v in se),
        r_squared=fit.r_squared, residual_dof=fit.residual_dof)


def risk_free_series(series: ReturnSeries, factors: Mapping[int, object]) -> ReturnSeries:
    missing = [m for m in series.months if m not in factors]
    if missing:
        raise InputError(f"risk-free rate missing for {format_month(missing[0])}")
    return ReturnSeries(series.start, np.array([factors[m].risk_free for m in series.months]))
