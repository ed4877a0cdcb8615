"""Age mixtures of lognormals and tail diagnostics.

At a fixed age t the edits-per-article density is lognormal with
mu(t) = log(n0) + a*t and sigma2(t) = s2*t. The corpus-wide density is
that lognormal integrated over article ages, weighted by the article-
creation rate: ages near the analysis horizon are discounted relative to
old ones by exp(g * (T - t)) when creation grows exponentially at rate
g. A small age floor keeps the sigma2 -> 0 singularity out of the
integral; articles younger than the floor are a point mass at n0 and
are excluded from (and not counted against) the continuous density,
which therefore integrates to one over ages [floor, T].

In the long-time exponential-growth limit the mixture develops a stable
power-law tail, whereas any finite-horizon mixture with g = 0 keeps the
lognormal's window-dependent log-log slope; tail_exponent measures that
distinction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import DomainError, InsufficientTailError, NumericalError

DEFAULT_AGE_FLOOR = 1.0
QUAD_REL_TOL = 1e-6
_SCAN_POINTS = 513


@dataclass(frozen=True)
class MixtureSpec:
    """Parameters of the age mixture.

    horizon_T is the oldest article age; growth_g the exponential
    article-creation growth rate (0 = constant creation); age_floor the
    youngest age included in the continuous mixture.
    """

    drift_a: float
    noise_var_s2: float
    horizon_T: float
    growth_g: float = 0.0
    initial_edits_n0: float = 1.0
    age_floor: float = DEFAULT_AGE_FLOOR

    def __post_init__(self):
        if not self.noise_var_s2 > 0.0:
            raise DomainError(f"noise_var_s2 must be > 0, got {self.noise_var_s2}")
        if not self.horizon_T > 0.0:
            raise DomainError(f"horizon_T must be > 0, got {self.horizon_T}")
        if self.growth_g < 0.0:
            raise DomainError(f"growth_g must be >= 0, got {self.growth_g}")
        if not self.initial_edits_n0 >= 1.0:
            raise DomainError(f"initial_edits_n0 must be >= 1, got {self.initial_edits_n0}")
        if not self.age_floor > 0.0:
            raise DomainError(f"age_floor must be > 0, got {self.age_floor}")

    def moments(self, age):
        """(mu, sigma2) of log counts at the given age(s)."""
        return np.log(self.initial_edits_n0) + self.drift_a * age, self.noise_var_s2 * age

    @property
    def degenerate(self) -> bool:
        """True when the age window collapses to the single age horizon_T."""
        return self.horizon_T <= self.age_floor


def lognormal_pdf(n, mu: float, sigma2: float):
    """Density of a lognormal with log-mean mu and log-variance sigma2."""
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0.0):
        raise DomainError("lognormal density requires n > 0")
    if not sigma2 > 0.0:
        raise DomainError(f"sigma2 must be > 0, got {sigma2}")
    log_n = np.log(n)
    out = np.exp(-((log_n - mu) ** 2) / (2.0 * sigma2)) / (n * math.sqrt(2.0 * math.pi * sigma2))
    return out if out.shape else float(out)


def discrete_mixture_pdf(n, ages, weights, spec: MixtureSpec):
    """Finite mixture over explicit ages; weights are normalized."""
    ages = np.asarray(ages, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if ages.size == 0 or ages.shape != weights.shape:
        raise DomainError("ages and weights must be equal-length and non-empty")
    if np.any(ages <= 0.0) or np.any(weights < 0.0) or weights.sum() <= 0.0:
        raise DomainError("ages must be positive and weights non-negative with positive sum")
    weights = weights / weights.sum()
    total = 0.0
    for age, w in zip(ages, weights):
        mu, s2 = spec.moments(age)
        total = total + w * np.asarray(lognormal_pdf(n, mu, s2))
    return total if np.ndim(n) else float(total)


def _log_weight(spec: MixtureSpec, t):
    """log of the age weight, normalized over [age_floor, horizon_T]."""
    span = spec.horizon_T - spec.age_floor
    g = spec.growth_g
    if g == 0.0:
        return np.zeros_like(np.asarray(t, dtype=float)) - math.log(span)
    # w(t) = g * exp(-g (t - floor)) / (1 - exp(-g * span))
    return math.log(g) - g * (np.asarray(t, dtype=float) - spec.age_floor) - math.log(
        -math.expm1(-g * span)
    )


def _log_integrand(spec: MixtureSpec, log_n: float, t):
    t = np.asarray(t, dtype=float)
    mu, s2 = spec.moments(t)
    log_pdf = -log_n - 0.5 * np.log(2.0 * math.pi * s2) - (log_n - mu) ** 2 / (2.0 * s2)
    return _log_weight(spec, t) + log_pdf


def mixture_log_pdf(n: float, spec: MixtureSpec) -> float:
    """log of mixture_pdf at scalar n; usable far into the tail."""
    if not n > 0.0:
        raise DomainError(f"n must be > 0, got {n}")
    log_n = math.log(n)
    if spec.degenerate:
        mu, s2 = spec.moments(spec.horizon_T)
        return float(_log_integrand_single(log_n, mu, s2))
    grid = np.linspace(spec.age_floor, spec.horizon_T, _SCAN_POINTS)
    log_f = _log_integrand(spec, log_n, grid)
    shift = float(np.max(log_f))
    if not np.isfinite(shift):
        return -math.inf
    peak = float(grid[int(np.argmax(log_f))])
    value, _, info, *tail = integrate.quad(
        lambda t: math.exp(_log_integrand(spec, log_n, t) - shift),
        spec.age_floor,
        spec.horizon_T,
        points=[peak],
        limit=200,
        epsabs=1e-12,
        epsrel=QUAD_REL_TOL,
        full_output=True,
    )
    if tail:  # quad appends a message (and possibly more) on trouble
        raise NumericalError(
            f"age-mixture quadrature failed at n={n!r}: {tail[0]}"
        )
    if value <= 0.0:
        return -math.inf
    return shift + math.log(value)


def _log_integrand_single(log_n: float, mu: float, s2: float) -> float:
    return -log_n - 0.5 * math.log(2.0 * math.pi * s2) - (log_n - mu) ** 2 / (2.0 * s2)


def mixture_pdf(n, spec: MixtureSpec):
    """Age-integrated edits-per-article density at n (scalar or array)."""
    if np.ndim(n) == 0:
        return math.exp(mixture_log_pdf(float(n), spec))
    flat = [math.exp(mixture_log_pdf(float(v), spec)) for v in np.asarray(n).ravel()]
    return np.array(flat).reshape(np.shape(n))


def fit_loglog_slope(n, density) -> tuple[float, float]:
    """Least-squares slope and r^2 of log density against log n."""
    n = np.asarray(n, dtype=float)
    density = np.asarray(density, dtype=float)
    ok = (n > 0) & (density > 0) & np.isfinite(density)
    if ok.sum() < 3 or np.ptp(np.log(n[ok])) == 0.0:
        raise DomainError("degenerate grid for log-log fit")
    x = np.log(n[ok])
    y = np.log(density[ok])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def tail_exponent(
    spec: MixtureSpec,
    n_lo: float,
    n_hi: float,
    points: int = 25,
) -> tuple[float, float]:
    """Candidate power-law exponent of the mixture tail over [n_lo, n_hi].

    Fits log density against log n on a geometric grid; the window must
    sit above the mixture's mode for the slope to mean anything. A slope
    that is stable across adjacent windows indicates a power-law tail; a
    window-dependent slope is the lognormal signature.
    """
    if not (0.0 < n_lo < n_hi):
        raise DomainError(f"need 0 < n_lo < n_hi, got ({n_lo}, {n_hi})")
    if points < 3:
        raise DomainError(f"need >= 3 grid points, got {points}")
    grid = np.geomspace(n_lo, n_hi, points)
    log_dens = np.array([mixture_log_pdf(float(v), spec) for v in grid])
    ok = np.isfinite(log_dens)
    if ok.sum() < 3:
        raise DomainError("density underflows to zero across the window")
    x = np.log(grid[ok])
    y = log_dens[ok]
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


@dataclass(frozen=True)
class FitComparison:
    """Lognormal vs discrete power law on the common tail support."""

    cutoff: int
    n_tail: int
    lognormal_mu: float
    lognormal_sigma2: float
    powerlaw_alpha: float
    loglik_lognormal: float
    loglik_powerlaw: float

    @property
    def delta(self) -> float:
        """Positive when the lognormal fits the tail better."""
        return self.loglik_lognormal - self.loglik_powerlaw


def _powerlaw_mle(tail: np.ndarray, cutoff: int) -> float:
    log_sum = float(np.sum(np.log(tail)))
    m = tail.size

    def neg_loglik(alpha: float) -> float:
        return alpha * log_sum + m * math.log(special.zeta(alpha, cutoff))

    res = optimize.minimize_scalar(neg_loglik, bounds=(1.0 + 1e-6, 12.0), method="bounded")
    if not res.success:
        raise NumericalError(f"power-law MLE failed: {res.message}")
    return float(res.x)


def _lognormal_tail_loglik(tail: np.ndarray, cutoff: int, mu: float, sigma2: float) -> float:
    """Log-likelihood of integer counts under the discretized lognormal.

    Count k carries the lognormal mass of [k - 0.5, k + 0.5), renormalized
    over [cutoff - 0.5, inf), so the contest with the discrete power law
    compares probability masses on the same support. Evaluated via
    logsf differences to stay finite deep in the tail.
    """
    sigma = math.sqrt(sigma2)
    z_lo = (np.log(tail - 0.5) - mu) / sigma
    z_hi = (np.log(tail + 0.5) - mu) / sigma
    logsf_lo = stats.norm.logsf(z_lo)
    logsf_hi = stats.norm.logsf(z_hi)
    log_mass = logsf_lo + np.log1p(-np.exp(logsf_hi - logsf_lo))
    log_total = stats.norm.logsf((math.log(cutoff - 0.5) - mu) / sigma)
    if not np.all(np.isfinite(log_mass)) or not np.isfinite(log_total):
        raise NumericalError("lognormal tail mass underflows at this cutoff")
    return float(np.sum(log_mass) - tail.size * log_total)


def compare_fits(sample, cutoff: int | None = None) -> FitComparison:
    """Contrast lognormal and power-law descriptions of the tail.

    The lognormal is fitted by log-moments on the full sample; a discrete
    power law p(n) ~ n^-alpha on {cutoff, cutoff+1, ...} is fitted by
    maximum likelihood. Both log-likelihoods are evaluated as probability
    masses over the integers at or above the cutoff (default: the sample
    median, rounded up), the lognormal discretized and renormalized to
    that support. The contest is a model diagnostic on our own stated
    terms, not a formal test.
    """
    sample = np.asarray(sample, dtype=float)
    if sample.size < 100:
        raise DomainError(f"need >= 100 values, got {sample.size}")
    if np.any(sample < 1.0) or np.any(np.abs(sample - np.rint(sample)) > 1e-9):
        raise DomainError("sample must be integer counts >= 1")
    if cutoff is None:
        cutoff = int(math.ceil(float(np.median(sample))))
    if cutoff < 1:
        raise DomainError(f"cutoff must be >= 1, got {cutoff}")
    logs = np.log(sample)
    mu = float(logs.mean())
    sigma2 = float(logs.var(ddof=1))
    if sigma2 <= 0.0:
        raise DomainError("constant sample; lognormal fit is degenerate")
    tail = sample[sample >= cutoff]
    if tail.size == 0:
        raise InsufficientTailError(f"no values at or above cutoff {cutoff}")
    ll_lognormal = _lognormal_tail_loglik(tail, cutoff, mu, sigma2)
    alpha = _powerlaw_mle(tail, cutoff)
    ll_powerlaw = float(
        -alpha * np.sum(np.log(tail)) - tail.size * math.log(special.zeta(alpha, cutoff))
    )
    return FitComparison(
        cutoff=cutoff,
        n_tail=int(tail.size),
        lognormal_mu=mu,
        lognormal_sigma2=sigma2,
        powerlaw_alpha=alpha,
        loglik_lognormal=ll_lognormal,
        loglik_powerlaw=ll_powerlaw,
    )
