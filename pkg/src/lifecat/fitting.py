"""Maximum-likelihood fitting for the threshold model.

GPD excess likelihood, Poisson exceedance intensity, left-truncated negative
binomial for mid-sized counts, and two flavours of confidence interval:
Wald intervals from the observed information and profile-likelihood
intervals found by bracketing and bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from .distributions import XI_ZERO, GpdParams, NegBinParams
from .simplex import simplex_maximize

__all__ = [
    "ExcessSample",
    "FitResult",
    "ConfidenceInterval",
    "gpd_loglik",
    "fit_gpd",
    "asymptotic_ci",
    "profile_ci",
    "profile_interval",
    "observed_information_cov",
    "fit_poisson_intensity",
    "poisson_process_loglik",
    "mpp_loglik",
    "truncated_negbin_loglik",
    "fit_truncated_negbin",
    "simplex_maximize",
]

MIN_EXCEEDANCES = 5


@dataclass(frozen=True)
class ExcessSample:
    """Excesses ``Y_j = X_j - u`` of the observations above ``u``."""

    threshold: float
    excesses: np.ndarray
    span: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.excesses, dtype=float)
        if y.ndim != 1:
            raise ValueError("excesses must be one-dimensional")
        if np.any(y <= 0):
            raise ValueError("all excesses must be strictly positive")
        if not self.span > 0:
            raise ValueError("observation span must be positive")
        object.__setattr__(self, "excesses", y)

    @classmethod
    def from_values(cls, values, threshold: float, span: float = 1.0) -> ExcessSample:
        x = np.asarray(values, dtype=float)
        return cls(threshold, x[x > threshold] - threshold, span)

    @property
    def count(self) -> int:
        return int(self.excesses.size)


@dataclass
class FitResult:
    params: np.ndarray
    names: tuple[str, ...]
    loglik: float
    cov: np.ndarray
    converged: bool
    flags: list[str] = field(default_factory=list)

    def __getitem__(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def se(self, index: int) -> float:
        v = self.cov[index, index]
        return math.sqrt(v) if v >= 0 else math.nan

    def as_dict(self) -> dict:
        return {
            "params": dict(zip(self.names, map(float, self.params))),
            "loglik": float(self.loglik),
            "cov": self.cov.tolist(),
            "converged": bool(self.converged),
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class ConfidenceInterval:
    estimate: float
    lower: float
    upper: float
    level: float
    method: str
    open_lower: bool = False
    open_upper: bool = False

    def __post_init__(self):
        if not (self.lower <= self.estimate <= self.upper):
            raise ValueError(f"interval [{self.lower}, {self.upper}] does not contain {self.estimate}")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


# --------------------------------------------------------------------------
# numerical helpers
# --------------------------------------------------------------------------


def _hessian(fun: Callable[[np.ndarray], float], x: np.ndarray) -> np.ndarray:
    """Central-difference Hessian with step ``1e-5 (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = 1e-5 * (1.0 + np.abs(x))
    f0 = fun(x)
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (fun(x + ei) - 2.0 * f0 + fun(x - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
    return H


def observed_information_cov(loglik: Callable[[np.ndarray], float], mle) -> np.ndarray:
    """Inverse observed information at ``mle``; NaN matrix if not invertible."""
    mle = np.asarray(mle, dtype=float)
    with np.errstate(invalid="ignore"):
        H = _hessian(loglik, mle)
    if not np.all(np.isfinite(H)):
        return np.full_like(H, np.nan)
    try:
        cov = np.linalg.inv(-H)
    except np.linalg.LinAlgError:
        return np.full_like(H, np.nan)
    cov = 0.5 * (cov + cov.T)
    if np.any(np.diag(cov) < 0):
        return np.full_like(H, np.nan)
    return cov


# --------------------------------------------------------------------------
# GPD
# --------------------------------------------------------------------------


def _gpd_loglik_arr(xi: float, beta: float, y: np.ndarray) -> float:
    if not beta > 0:
        return -math.inf
    n = y.size
    if abs(xi) < XI_ZERO:
        return -n * math.log(beta) - float(y.sum()) / beta
    z = xi * y / beta
    if np.any(z <= -1.0):
        return -math.inf
    return -n * math.log(beta) - (1.0 + 1.0 / xi) * float(np.log1p(z).sum())


def gpd_loglik(params: GpdParams | Sequence[float], sample: ExcessSample) -> float:
    """GPD log-likelihood of the excesses; ``-inf`` when constraints fail."""
    if isinstance(params, GpdParams):
        xi, beta = params.xi, params.beta
    else:
        xi, beta = map(float, params)
    return _gpd_loglik_arr(xi, beta, sample.excesses)


def _gpd_start(y: np.ndarray) -> tuple[float, float]:
    m, v = float(y.mean()), float(y.var())
    if v <= 0:
        return 0.1, m
    xi = 0.5 * (1.0 - m * m / v)
    beta = 0.5 * m * (m * m / v + 1.0)
    return float(np.clip(xi, -0.4, 0.9)), beta


def fit_gpd(sample: ExcessSample) -> FitResult:
    """Maximum-likelihood GPD fit to the excesses.

    The search runs over ``(xi, log beta)``; the covariance is reported on
    ``(xi, beta)`` from the observed information.

    Raises:
        ValueError: with fewer than five excesses.
    """
    y = sample.excesses
    if y.size < MIN_EXCEEDANCES:
        raise ValueError(f"need at least {MIN_EXCEEDANCES} excesses, got {y.size}")
    flags: list[str] = []
    if np.ptp(y) == 0:
        # likelihood increases without bound toward xi = -1, beta = max(y)
        return FitResult(
            params=np.array([-1.0, float(y[0])]),
            names=("xi", "beta"),
            loglik=math.nan,
            cov=np.full((2, 2), np.nan),
            converged=False,
            flags=["degenerate: all excesses equal"],
        )

    best = None
    for xi0, beta0 in (_gpd_start(y), (0.1, float(y.mean())), (0.5, float(np.median(y)))):
        res = simplex_maximize(
            lambda th: _gpd_loglik_arr(th[0], math.exp(th[1]), y),
            [xi0, math.log(beta0)],
            step=[0.1, 0.1],
        )
        if best is None or res.fun > best.fun:
            best = res
    xi, beta = float(best.x[0]), math.exp(float(best.x[1]))
    cov = observed_information_cov(lambda th: _gpd_loglik_arr(th[0], th[1], y), [xi, beta])
    if not best.converged:
        flags.append("not converged")
    if xi <= -0.5:
        flags.append("near boundary: xi <= -0.5, regularity conditions fail")
    if np.any(np.isnan(cov)):
        flags.append("observed information not positive definite")
    return FitResult(
        params=np.array([xi, beta]),
        names=("xi", "beta"),
        loglik=float(best.fun),
        cov=cov,
        converged=best.converged,
        flags=flags,
    )


# --------------------------------------------------------------------------
# confidence intervals
# --------------------------------------------------------------------------


def asymptotic_ci(fit: FitResult, index: int, level: float = 0.95, log_scale: bool = False) -> ConfidenceInterval:
    """Wald interval ``estimate +/- z SE``.

    With ``log_scale`` the interval is built for ``log(theta)`` and mapped
    back, which keeps positive parameters positive.
    """
    est = float(fit.params[index])
    se = fit.se(index)
    z = stats.norm.ppf(0.5 + level / 2.0)
    if not math.isfinite(se) or se == 0:
        se = 0.0 if se == 0 else math.nan
    if math.isnan(se):
        return ConfidenceInterval(est, est, est, level, "asymptotic")
    if log_scale:
        half = z * se / est
        return ConfidenceInterval(est, est * math.exp(-half), est * math.exp(half), level, "asymptotic")
    return ConfidenceInterval(est, est - z * se, est + z * se, level, "asymptotic")


def profile_interval(
    loglik: Callable[[np.ndarray], float],
    mle: Sequence[float],
    index: int,
    level: float = 0.95,
    se: float | None = None,
    max_loglik: float | None = None,
    bracket_se: float = 20.0,
    expand_to_se: float | None = None,
    nuisance_step=None,
    rtol: float = 1e-6,
) -> ConfidenceInterval:
    """Profile-likelihood interval for coordinate ``index`` of ``loglik``.

    The interval is ``{theta : 2 (l_max - l_p(theta)) <= chi2_1(level)}``.
    Each side starts at the MLE and walks outward in growing multiples of
    ``se`` until the deviance crosses the cut-off, then bisects. A side that
    never crosses within ``bracket_se`` standard errors (or ``expand_to_se``
    when given) is reported open at the last point tried.

    Args:
        loglik: Full log-likelihood over the parameter vector.
        mle: Maximizer of ``loglik``.
        index: Coordinate to profile.
        level: Coverage level.
        se: Scale for the outward walk; defaults to 10% of ``|mle[index]|``.
        max_loglik: ``loglik(mle)`` if already known.
        bracket_se: Search reach in standard errors.
        expand_to_se: Optional larger reach for strongly skewed profiles.
        nuisance_step: Initial simplex step for the nuisance coordinates.
        rtol: Relative tolerance on the end points.
    """
    mle = np.asarray(mle, dtype=float)
    n = mle.size
    others = [i for i in range(n) if i != index]
    lmax = float(loglik(mle)) if max_loglik is None else max_loglik
    crit = float(stats.chi2.ppf(level, 1))
    est = float(mle[index])
    scale = se if se is not None and math.isfinite(se) and se > 0 else 0.1 * max(abs(est), 1e-3)
    reach = max(bracket_se, expand_to_se or 0.0)

    def full(theta: float, nuis: np.ndarray) -> np.ndarray:
        v = np.empty(n)
        v[index] = theta
        v[others] = nuis
        return v

    def profile(theta: float, warm: np.ndarray) -> tuple[float, np.ndarray]:
        if not others:
            return float(loglik(np.array([theta]))), warm
        obj = lambda nu: loglik(full(theta, nu))  # noqa: E731
        if not math.isfinite(obj(warm)):
            return -math.inf, warm
        res = simplex_maximize(obj, warm, step=nuisance_step)
        return res.fun, res.x

    def side(direction: int) -> tuple[float, bool]:
        warm = mle[others].copy()
        inside_theta, inside_warm = est, warm
        mult = 0.5
        while True:
            theta = est + direction * mult * scale
            val, nu = profile(theta, inside_warm)
            dev = 2.0 * (lmax - val)
            if dev > crit:
                break
            inside_theta, inside_warm = theta, nu
            if mult >= reach:
                return inside_theta, True
            mult = min(mult * 2.0, reach)
        lo_t, hi_t = inside_theta, theta
        while abs(hi_t - lo_t) > rtol * (abs(lo_t) + scale * 1e-3):
            mid = 0.5 * (lo_t + hi_t)
            val, nu = profile(mid, inside_warm)
            if 2.0 * (lmax - val) > crit:
                hi_t = mid
            else:
                lo_t, inside_warm = mid, nu
        return 0.5 * (lo_t + hi_t), False

    lower, open_lo = side(-1)
    upper, open_hi = side(+1)
    return ConfidenceInterval(est, min(lower, est), max(upper, est), level, "profile", open_lo, open_hi)


def profile_ci(sample: ExcessSample, index: int, level: float = 0.95, fit: FitResult | None = None) -> ConfidenceInterval:
    """Profile-likelihood interval for ``xi`` (index 0) or ``beta`` (index 1)."""
    fit = fit or fit_gpd(sample)
    if not fit.converged:
        raise ValueError("profile interval requires a converged fit")
    y = sample.excesses
    return profile_interval(
        lambda th: _gpd_loglik_arr(th[0], th[1], y),
        fit.params,
        index,
        level,
        se=fit.se(index),
        max_loglik=fit.loglik,
        nuisance_step=[0.1 * fit.params[1 - index] if index == 0 else 0.1],
    )


# --------------------------------------------------------------------------
# Poisson intensity
# --------------------------------------------------------------------------


def fit_poisson_intensity(count: int, span: float, level: float = 0.95) -> tuple[float, ConfidenceInterval]:
    """Annual rate ``count / span`` with the exact (Garwood) Poisson interval."""
    if count < 0 or not span > 0:
        raise ValueError("count must be >= 0 and span > 0")
    a = 1.0 - level
    lo = 0.0 if count == 0 else stats.chi2.ppf(a / 2.0, 2 * count) / 2.0
    hi = stats.chi2.ppf(1.0 - a / 2.0, 2 * count + 2) / 2.0
    rate = count / span
    return rate, ConfidenceInterval(rate, lo / span, hi / span, level, "exact-poisson")


def poisson_process_loglik(rate: float, count: int, span: float) -> float:
    """Log-likelihood of ``count`` event times on a window of length ``span``."""
    if rate <= 0:
        return 0.0 if count == 0 else -math.inf
    return count * math.log(rate) - rate * span


def mpp_loglik(rate: float, gpd: GpdParams, sample: ExcessSample) -> float:
    """Marked-process log-likelihood: Poisson count term plus GPD marks.

    ``rate`` is annual; the count ``N_u`` is Poisson with mean
    ``rate * span``.
    """
    lam = rate * sample.span
    k = sample.count
    if lam <= 0:
        count_term = 0.0 if k == 0 else -math.inf
    else:
        count_term = k * math.log(lam) - lam - math.lgamma(k + 1)
    return count_term + gpd_loglik(gpd, sample)


# --------------------------------------------------------------------------
# left-truncated negative binomial
# --------------------------------------------------------------------------


def truncated_negbin_loglik(r: float, p: float, counts: np.ndarray, lower: int) -> float:
    """Sum of ``log P(N = k | N > lower)`` under NegBin(r, p)."""
    if not (r > 0 and 0 < p < 1):
        return -math.inf
    k = np.asarray(counts, dtype=float)
    logpmf = special.gammaln(k + r) - special.gammaln(r) - special.gammaln(k + 1) + r * math.log(p) + k * math.log1p(-p)
    log_tail = float(stats.nbinom.logsf(lower, r, p))
    if not math.isfinite(log_tail):
        return -math.inf
    return float(logpmf.sum()) - k.size * log_tail


def fit_truncated_negbin(counts: Sequence[int], lower: int) -> FitResult:
    """MLE of ``(r, p)`` from counts observed only above ``lower``.

    The search runs over ``(log r, logit p)``; covariance is on ``(r, p)``.
    """
    k = np.asarray(counts, dtype=float)
    if k.size == 0:
        raise ValueError("no counts supplied")
    if np.any(k <= lower) or np.any(k != np.round(k)):
        raise ValueError(f"all counts must be integers above {lower}")
    flags: list[str] = []
    if np.all(k == lower + 1):
        # mass piles on lower+1; the likelihood is maximized only in a limit
        return FitResult(
            params=np.array([math.nan, math.nan]),
            names=("r", "p"),
            loglik=0.0,
            cov=np.full((2, 2), np.nan),
            converged=False,
            flags=["boundary: all counts equal lower + 1"],
        )

    def obj(th):
        return truncated_negbin_loglik(math.exp(th[0]), special.expit(th[1]), k, lower)

    m = float(k.mean())
    best = None
    for r0 in (0.5, 1.0, 3.0):
        p0 = r0 / (r0 + max(m - lower, 1.0))
        res = simplex_maximize(obj, [math.log(r0), special.logit(p0)], step=[0.3, 0.3])
        if best is None or res.fun > best.fun:
            best = res
    r, p = math.exp(best.x[0]), float(special.expit(best.x[1]))
    cov = observed_information_cov(lambda th: truncated_negbin_loglik(th[0], th[1], k, lower), [r, p])
    if not best.converged:
        flags.append("not converged")
    if r < 1e-3 or r > 1e4 or p > 1 - 1e-6 or p < 1e-6:
        flags.append("boundary: estimate at edge of parameter space")
    return FitResult(np.array([r, p]), ("r", "p"), float(best.fun), cov, best.converged, flags)


def negbin_from_fit(fit: FitResult) -> NegBinParams:
    return NegBinParams(fit["r"], fit["p"])
