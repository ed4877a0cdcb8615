"""Per-slice lognormal fitting, goodness of fit, and age trends.

Articles are grouped into creation-time slices; within a slice the log
edit counts are fitted by their sample mean and unbiased variance, and
the fit is tested with a likelihood-ratio (G) statistic over bins chosen
so that every bin's expected count exceeds a floor (default 8). Slice
moments regressed against slice age estimate the process drift (slope of
mu) and noise variance (slope of sigma2).

Binning detail: bins are equal-expected-mass intervals of the fitted
normal, using the largest bin count B with n/B > min_expected. This is
the limit of growing bins from a fine grid until each holds just over
min_expected expected observations; having no grid, the construction is
resolution-free and scale-equivariant (edges move with the fitted
parameters). The G statistic is divided by the Williams factor
1 + (B + 1)/(6n) before the chi-square tail lookup; without it the test
runs measurably liberal at expected counts near 8.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import (
    DegenerateFitError,
    DomainError,
    InsufficientDataError,
    NoSlicesError,
)
from .ingest import ArticleRollup

MIN_SLICE_FLOOR = 50
DEFAULT_MIN_SLICE = 400
DEFAULT_MIN_EXPECTED = 8.0
DEFAULT_OUTLIER_Z = 3.0
MIN_TESTABLE_BINS = 4


@dataclass(frozen=True)
class Slice:
    """Articles created in [start_time, end_time), as one sample."""

    start_time: float
    end_time: float
    mean_age: float
    members: np.ndarray = field(repr=False)  # per-article edit counts

    @property
    def n_articles(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SliceFit:
    """Lognormal fit of one slice, with optional test fields.

    g_statistic is the Williams-corrected likelihood-ratio statistic;
    p_value its upper chi-square tail at dof = n_bins - 3. Test fields
    stay None when the slice is untestable (zero variance or fewer than
    4 bins).
    """

    mu: float
    sigma2: float
    n_articles: int
    g_statistic: float | None = None
    dof: int | None = None
    p_value: float | None = None
    n_bins: int | None = None

    @property
    def testable(self) -> bool:
        return self.p_value is not None


@dataclass(frozen=True)
class TrendFit:
    slope: float
    intercept: float
    r_squared: float
    excluded_slices: tuple = ()


def make_slices(
    rollups: Sequence[ArticleRollup],
    min_slice_size: int = DEFAULT_MIN_SLICE,
    *,
    cutoff: float,
) -> list[Slice]:
    """Greedy creation-time slicing.

    Articles sorted by creation time are packed into slices extended
    minimally to hold at least min_slice_size articles; a slice boundary
    never splits identical creation times. An undersized final remainder
    is absorbed into the last slice, so slices are disjoint and cover
    every article. mean_age = cutoff - mean creation time.
    """
    if min_slice_size < MIN_SLICE_FLOOR:
        raise DomainError(f"min_slice_size must be >= {MIN_SLICE_FLOOR}, got {min_slice_size}")
    ordered = sorted(rollups, key=lambda r: (r.creation_time, r.article_id))
    n = len(ordered)
    if n < min_slice_size:
        raise NoSlicesError(f"{n} articles cannot fill a slice of {min_slice_size}")

    bounds = []  # index one past each slice's last article
    i = 0
    while n - i >= min_slice_size:
        j = i + min_slice_size
        while j < n and ordered[j].creation_time == ordered[j - 1].creation_time:
            j += 1
        bounds.append(j)
        i = j
    if i < n:  # undersized remainder joins the final slice
        bounds[-1] = n

    slices = []
    start_idx = 0
    for b, end_idx in enumerate(bounds):
        group = ordered[start_idx:end_idx]
        creations = np.array([r.creation_time for r in group])
        start = group[0].creation_time if b == 0 else slices[-1].end_time
        if end_idx < n:
            end = ordered[end_idx].creation_time
        else:
            end = max(cutoff, float(np.nextafter(creations[-1], np.inf)))
        slices.append(
            Slice(
                start_time=float(start),
                end_time=float(end),
                mean_age=float(cutoff - creations.mean()),
                members=np.array([float(r.edit_count) for r in group]),
            )
        )
        start_idx = end_idx
    return slices


def fit_slice(slc: Slice) -> SliceFit:
    """Sample mean and unbiased variance of the natural-log counts."""
    members = np.asarray(slc.members, dtype=float)
    if members.size == 0:
        raise DomainError("empty slice")
    if np.any(members <= 0.0):
        raise DomainError("non-positive count in slice; log undefined")
    logs = np.log(members)
    if logs.size > 1 and np.any(logs != logs[0]):
        sigma2 = float(logs.var(ddof=1))
    else:
        sigma2 = 0.0  # a constant sample is exactly degenerate
    return SliceFit(mu=float(logs.mean()), sigma2=sigma2, n_articles=int(members.size))


def _bin_count(n: int, min_expected: float) -> int:
    b = int(n // min_expected)
    while b > 1 and not n / b > min_expected:
        b -= 1
    return max(b, 1)


def g_statistic(observed: np.ndarray, expected: np.ndarray) -> float:
    """2 * sum(observed * log(observed / expected)), with 0 * log 0 = 0."""
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    mask = observed > 0
    return float(2.0 * np.sum(observed[mask] * np.log(observed[mask] / expected[mask])))


def gof_test(slc: Slice, fitted: SliceFit, min_expected: float = DEFAULT_MIN_EXPECTED) -> SliceFit:
    """Likelihood-ratio goodness-of-fit test of the fitted lognormal.

    Log counts are binned into the largest number B of equal-expected-
    mass intervals of Normal(mu, sigma2) with n/B > min_expected (tail
    intervals unbounded, so tails are merged inward by construction).
    Returns a copy of the fit with g_statistic, dof = B - 3, p_value and
    n_bins filled; a fit with fewer than 4 bins is returned untestable.
    """
    if not min_expected > 0.0:
        raise DomainError(f"min_expected must be > 0, got {min_expected}")
    if fitted.sigma2 <= 0.0:
        raise DegenerateFitError("zero log-count variance; lognormal fit is degenerate")
    n = fitted.n_articles
    b = _bin_count(n, min_expected)
    if b < MIN_TESTABLE_BINS:
        return replace(fitted, n_bins=b)
    edges = fitted.mu + np.sqrt(fitted.sigma2) * stats.norm.ppf(np.arange(1, b) / b)
    logs = np.log(np.asarray(slc.members, dtype=float))
    observed = np.bincount(np.searchsorted(edges, logs), minlength=b)
    g = g_statistic(observed, np.full(b, n / b))
    g /= 1.0 + (b + 1) / (6.0 * n)  # Williams correction
    dof = b - 3
    return replace(
        fitted,
        g_statistic=g,
        dof=dof,
        p_value=float(stats.chi2.sf(g, dof)),
        n_bins=b,
    )


def fit_all(slices: Sequence[Slice], min_expected: float = DEFAULT_MIN_EXPECTED) -> list[SliceFit]:
    """fit_slice + gof_test per slice; degenerate slices come back untestable."""
    fits = []
    for slc in slices:
        fit = fit_slice(slc)
        if fit.sigma2 > 0.0:
            fit = gof_test(slc, fit, min_expected)
        fits.append(fit)
    return fits


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, np.ndarray]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot > 0.0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if np.isclose(ss_res, 0.0) else 0.0
    return float(slope), float(intercept), r2, resid


def _trend_one(x: np.ndarray, y: np.ndarray, outlier_z: float) -> TrendFit:
    slope, intercept, r2, resid = _ols(x, y)
    scale = resid.std(ddof=2) if resid.size > 2 else 0.0
    if scale <= 1e-12 * max(1.0, float(np.abs(y).max())):
        return TrendFit(slope, intercept, r2)
    flagged = np.flatnonzero(np.abs(resid) > outlier_z * scale)
    if flagged.size == 0 or x.size - flagged.size < 3:
        return TrendFit(slope, intercept, r2)
    keep = np.setdiff1d(np.arange(x.size), flagged)
    slope, intercept, r2, _ = _ols(x[keep], y[keep])
    return TrendFit(slope, intercept, r2, excluded_slices=tuple(int(i) for i in flagged))


def fit_trend(
    fits: Sequence[tuple[float, SliceFit]],
    outlier_z: float = DEFAULT_OUTLIER_Z,
) -> tuple[TrendFit, TrendFit]:
    """OLS of mu and of sigma2 against slice mean age.

    Slices whose residual exceeds outlier_z residual standard deviations
    are flagged, excluded, and the fit recomputed once (independently for
    the mu and sigma2 regressions). Slopes estimate the per-time-unit
    drift and noise variance.
    """
    if len(fits) < 3:
        raise InsufficientDataError(f"need >= 3 slices, got {len(fits)}")
    ages = np.array([age for age, _ in fits], dtype=float)
    mus = np.array([f.mu for _, f in fits], dtype=float)
    sig2s = np.array([f.sigma2 for _, f in fits], dtype=float)
    return _trend_one(ages, mus, outlier_z), _trend_one(ages, sig2s, outlier_z)


def estimate_autocorr(
    per_period_counts: Iterable[Sequence[int]],
    max_lag: int,
) -> np.ndarray:
    """Sample autocorrelation of pooled per-period fractional increases.

    Each sequence holds edits per consecutive period for one article;
    the fractional increase at period j is counts[j] / cumulative[j-1],
    skipping periods whose denominator is zero. Lagged products never
    straddle article boundaries. Returns autocorrelations at lags
    1..max_lag.

    Note this measures the observed count process: cumulative counts
    stall whenever the underlying activity dips below its running
    maximum, and runs of stalled periods read as positive
    autocorrelation even for serially independent noise. The estimate
    reflects per-step noise correlation only in drift-dominated regimes
    where stalls are rare.
    """
    if max_lag < 1:
        raise DomainError(f"max_lag must be >= 1, got {max_lag}")
    chunks = []
    for seq in per_period_counts:
        arr = np.asarray(seq, dtype=float)
        if arr.size <= max_lag + 1:
            continue
        cum = np.cumsum(arr)
        denom = cum[:-1]
        ratio = np.divide(arr[1:], denom, out=np.full(arr.size - 1, np.nan), where=denom > 0)
        ratio = ratio[~np.isnan(ratio)]
        if ratio.size > max_lag:
            chunks.append(ratio)
    if not chunks:
        raise InsufficientDataError(f"no sequence longer than max_lag + 1 = {max_lag + 1}")
    pooled = np.concatenate(chunks)
    mean = pooled.mean()
    var = pooled.var()
    if var == 0.0:
        raise InsufficientDataError("zero-variance increases; autocorrelation undefined")
    acf = np.empty(max_lag)
    for lag in range(1, max_lag + 1):
        num = 0.0
        count = 0
        for ratio in chunks:
            d = ratio - mean
            num += float(np.sum(d[:-lag] * d[lag:]))
            count += d.size - lag
        acf[lag - 1] = num / (count * var)
    return acf
