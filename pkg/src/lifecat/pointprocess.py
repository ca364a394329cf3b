"""Two-dimensional Poisson point-process (POT) likelihood and trend models.

Parameter vectors, by model:

* ``M0``: ``(xi, mu, sigma)``
* ``M1``: ``(xi, kappa0, kappa1, sigma)`` with ``mu(t) = kappa0 + kappa1 t``
* ``M2``: ``(xi, mu, kappa0, kappa1)`` with ``sigma(t) = exp(kappa0 + kappa1 t)``

Time is in years. For the trend models the expected number of exceedances,
``int tau_t(u) dt`` over the window, is evaluated by composite Simpson.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, stats

from .distributions import XI_ZERO, DomainError, GpdParams
from .fitting import (
    ExcessSample,
    FitResult,
    fit_gpd,
    gpd_loglik,
    observed_information_cov,
    poisson_process_loglik,
)
from .simplex import simplex_maximize

__all__ = [
    "PotData",
    "PotParams",
    "MODELS",
    "pot_loglik",
    "pot_loglik_terms",
    "fit_pot",
    "lr_test",
    "pot_to_gpd",
    "gpd_to_pot",
]

MODELS = {
    "M0": ("xi", "mu", "sigma"),
    "M1": ("xi", "kappa0", "kappa1", "sigma"),
    "M2": ("xi", "mu", "kappa0", "kappa1"),
}

SIMPSON_INTERVALS = 1024


@dataclass(frozen=True)
class PotData:
    """Exceedance times and sizes over the window ``(start, start + span]``."""

    times: np.ndarray
    sizes: np.ndarray
    threshold: float
    span: float
    start: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.sizes, dtype=float)
        if t.shape != x.shape or t.ndim != 1:
            raise ValueError("times and sizes must be 1-d arrays of equal length")
        if not self.span > 0:
            raise ValueError("window length must be positive")
        if np.any(t <= self.start) or np.any(t > self.start + self.span):
            raise ValueError("exceedance times must lie in the observation window")
        if np.any(x <= self.threshold):
            raise ValueError("sizes must exceed the threshold")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "sizes", x)

    @property
    def count(self) -> int:
        return int(self.times.size)

    def shifted(self, offset: float) -> PotData:
        return PotData(self.times + offset, self.sizes, self.threshold, self.span, self.start + offset)

    def excess_sample(self) -> ExcessSample:
        return ExcessSample(self.threshold, self.sizes - self.threshold, self.span)


@dataclass(frozen=True)
class PotParams:
    model: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if len(self.values) != len(MODELS[self.model]):
            raise ValueError(f"{self.model} takes {len(MODELS[self.model])} parameters")

    def __getitem__(self, name: str) -> float:
        return self.values[MODELS[self.model].index(name)]

    def location_scale(self, t) -> tuple[float, np.ndarray, np.ndarray]:
        """``(xi, mu(t), sigma(t))`` evaluated at times ``t``."""
        t = np.asarray(t, dtype=float)
        v = self.values
        if self.model == "M0":
            xi, mu, sigma = v
            return xi, np.full_like(t, mu), np.full_like(t, sigma)
        if self.model == "M1":
            xi, k0, k1, sigma = v
            return xi, k0 + k1 * t, np.full_like(t, sigma)
        xi, mu, k0, k1 = v
        return xi, np.full_like(t, mu), np.exp(k0 + k1 * t)


def _log_intensity(xi: float, mu: np.ndarray, sigma: np.ndarray, x: np.ndarray) -> np.ndarray:
    z = (x - mu) / sigma
    if abs(xi) < XI_ZERO:
        return -np.log(sigma) - z
    base = 1.0 + xi * z
    with np.errstate(invalid="ignore", divide="ignore"):
        out = -np.log(sigma) - (1.0 / xi + 1.0) * np.log1p(xi * z)
    return np.where(base > 0, out, -np.inf)


def _tau(xi: float, mu, sigma, u: float):
    """Exceedance rate of level ``u``, ``(1 + xi (u - mu)/sigma)^(-1/xi)``."""
    z = (u - np.asarray(mu)) / np.asarray(sigma)
    if abs(xi) < XI_ZERO:
        return np.exp(-z)
    base = 1.0 + xi * z
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.exp(-np.log1p(xi * z) / xi)
    # u beyond the upper end point (xi < 0) contributes nothing; below the
    # lower end point (xi > 0) the measure is infinite
    return np.where(base > 0, out, 0.0 if xi < 0 else np.inf)


def _volume(params: PotParams, u: float, start: float, span: float) -> float:
    if params.model == "M0":
        xi, mu, sigma = params.values
        return span * float(_tau(xi, mu, sigma, u))
    grid = np.linspace(start, start + span, SIMPSON_INTERVALS + 1)
    xi, mu, sigma = params.location_scale(grid)
    vals = _tau(xi, mu, sigma, u)
    if not np.all(np.isfinite(vals)):
        return math.inf
    return float(integrate.simpson(vals, x=grid))


def pot_loglik(params: PotParams | Sequence[float], data: PotData, model: str = "M0") -> float:
    """Point-process log-likelihood; ``-inf`` on any support violation."""
    if not isinstance(params, PotParams):
        params = PotParams(model, tuple(map(float, params)))
    xi, mu, sigma = params.location_scale(data.times)
    if np.any(sigma <= 0) or not math.isfinite(xi):
        return -math.inf
    if params.model != "M2" and params.values[-1] <= 0:
        return -math.inf
    vol = _volume(params, data.threshold, data.start, data.span)
    if not math.isfinite(vol):
        return -math.inf
    dens = _log_intensity(xi, mu, sigma, data.sizes)
    if not np.all(np.isfinite(dens)):
        return -math.inf
    return -vol + float(dens.sum())


def pot_loglik_terms(params: PotParams, data: PotData) -> tuple[float, float]:
    """Homogeneous-model log-likelihood split into count and excess parts.

    Returns ``(k log tau - n tau, GPD log-likelihood of the excesses)`` using
    the implied ``tau(u)`` and ``beta``; the two sum to :func:`pot_loglik`.
    """
    if params.model != "M0":
        raise ValueError("the factorization holds for the homogeneous model only")
    gpd, tau = pot_to_gpd(params, data.threshold)
    return poisson_process_loglik(tau, data.count, data.span), gpd_loglik(gpd, data.excess_sample())


def pot_to_gpd(params: PotParams | Sequence[float], u: float) -> tuple[GpdParams, float]:
    """GPD excess law and exceedance rate implied by homogeneous POT parameters.

    ``beta = sigma + xi (u - mu)`` and ``tau(u) = (1 + xi (u - mu)/sigma)^(-1/xi)``.
    """
    xi, mu, sigma = params.values if isinstance(params, PotParams) else params
    beta = sigma + xi * (u - mu)
    if not beta > 0:
        raise DomainError(f"implied GPD scale {beta} is not positive")
    return GpdParams(xi, beta), float(_tau(xi, mu, sigma, u))


def gpd_to_pot(gpd: GpdParams, tau: float, u: float) -> PotParams:
    """Inverse of :func:`pot_to_gpd`."""
    xi, beta = gpd.xi, gpd.beta
    if abs(xi) < XI_ZERO:
        sigma = beta
        mu = u + sigma * math.log(tau)
    else:
        sigma = beta * tau**xi
        mu = u - (beta - sigma) / xi
    return PotParams("M0", (xi, mu, sigma))


def _start_values(data: PotData, model: str, base: FitResult | None) -> np.ndarray:
    if model == "M0" or base is None:
        g = fit_gpd(data.excess_sample())
        rate = data.count / data.span
        m0 = gpd_to_pot(GpdParams(g["xi"], g["beta"]), rate, data.threshold)
        if not math.isfinite(pot_loglik(m0, data)):
            # a short-tailed GPD fit can sit on the support boundary (xi < -1);
            # restart from a mild positive shape that covers every point
            mean_excess = float(np.mean(data.sizes - data.threshold))
            m0 = gpd_to_pot(GpdParams(0.1, 0.9 * mean_excess), rate, data.threshold)
        if model == "M0":
            return np.array(m0.values)
        base_vals = np.array(m0.values)
    else:
        base_vals = base.params
    xi, mu, sigma = base_vals
    if model == "M1":
        return np.array([xi, mu, 0.0, sigma])
    return np.array([xi, mu, math.log(sigma), 0.0])


def fit_pot(data: PotData, model: str = "M0", start: Sequence[float] | None = None, base: FitResult | None = None) -> FitResult:
    """Maximum-likelihood fit of a POT model by simplex search.

    Trend models start from the homogeneous fit (``base``, fitted here when
    not supplied) with zero slope, so their maximum is never below it.
    """
    if data.count < 5:
        raise ValueError(f"need at least 5 exceedances, got {data.count}")
    if model != "M0" and base is None and start is None:
        base = fit_pot(data, "M0")
    x0 = np.asarray(start, dtype=float) if start is not None else _start_values(data, model, base)
    mid = data.start + 0.5 * data.span

    def obj(th):
        return pot_loglik(PotParams(model, tuple(th)), data)

    sig = float(x0[-1] if model == "M1" else (x0[2] if model == "M0" else math.exp(x0[2])))
    steps = {
        "M0": [0.1, 0.1 * sig, 0.1 * sig],
        "M1": [0.1, 0.1 * sig, 0.1 * sig / data.span, 0.1 * sig],
        "M2": [0.1, 0.1 * sig, 0.1, 0.1 / data.span],
    }[model]
    # trend models are searched with the intercept at mid-window, which
    # decorrelates intercept and slope
    if model == "M1":

        def to_model(th):
            return np.array([th[0], th[1] - th[2] * mid, th[2], th[3]])

        def from_model(th):
            return np.array([th[0], th[1] + th[2] * mid, th[2], th[3]])

    elif model == "M2":

        def to_model(th):
            return np.array([th[0], th[1], th[2] - th[3] * mid, th[3]])

        def from_model(th):
            return np.array([th[0], th[1], th[2] + th[3] * mid, th[3]])

    else:

        def to_model(th):
            return np.asarray(th, dtype=float)

        from_model = to_model

    res = simplex_maximize(lambda th: obj(to_model(th)), from_model(x0), step=steps)
    est = to_model(res.x)
    cov = observed_information_cov(obj, est)
    flags = [] if res.converged else ["not converged"]
    if np.any(np.isnan(cov)):
        flags.append("observed information not positive definite")
    return FitResult(est, MODELS[model], float(res.fun), cov, res.converged, flags)


def lr_test(restricted: FitResult | float, general: FitResult | float, df: int = 1) -> tuple[float, float]:
    """Likelihood-ratio statistic ``2 (l_general - l_restricted)`` and its chi-square p-value.

    Raises:
        ArithmeticError: if the statistic is below ``-1e-6``, which means the
            general model was not maximized properly.
    """
    l0 = restricted.loglik if isinstance(restricted, FitResult) else float(restricted)
    l1 = general.loglik if isinstance(general, FitResult) else float(general)
    stat = 2.0 * (l1 - l0)
    if stat < -1e-6:
        raise ArithmeticError(f"negative LR statistic {stat:.3g}: optimizer failure in the general model")
    stat = max(stat, 0.0)
    return stat, float(stats.chi2.sf(stat, df))
