"""Distributions used by the catastrophe model.

Closed-form CDFs and quantiles for the generalized Pareto and generalized
extreme value families, plus the count and proportion laws the simulation
needs (Poisson, negative binomial, beta, finite discrete) and a truncation
wrapper that works for any of them.

All objects are frozen dataclasses; samplers take a caller-owned
``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import stats

__all__ = [
    "DomainError",
    "GpdParams",
    "GevParams",
    "NegBinParams",
    "BetaParams",
    "PoissonDist",
    "DiscreteDist",
    "ShiftedGpd",
    "Truncated",
    "gpd_cdf",
    "gpd_quantile",
    "gev_cdf",
    "truncated_cdf",
    "truncated_quantile",
    "sample",
]

# below this |xi| the exponential / Gumbel branch is used
XI_ZERO = 1e-9


class DomainError(ValueError):
    """Argument outside the support or parameter domain."""


class Distribution(Protocol):
    discrete: bool

    def cdf(self, x): ...

    def ppf(self, p): ...

    def sample(self, rng: np.random.Generator, size=None): ...


def _uniform_open_left(rng: np.random.Generator, size=None):
    # uniform on (0, 1]; keeps inverse transforms away from the lower endpoint
    return 1.0 - rng.random(size)


# --------------------------------------------------------------------------
# generalized Pareto
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GpdParams:
    """Generalized Pareto law for threshold excesses.

    Attributes:
        xi: Shape (tail index). Heavier tail for larger values.
        beta: Scale, in deaths. Must be positive.
    """

    xi: float
    beta: float

    discrete = False

    def __post_init__(self):
        if not self.beta > 0 or not math.isfinite(self.beta):
            raise DomainError(f"GPD scale must be positive and finite, got {self.beta}")
        if not math.isfinite(self.xi):
            raise DomainError(f"GPD shape must be finite, got {self.xi}")

    @property
    def upper_endpoint(self) -> float:
        return -self.beta / self.xi if self.xi < -XI_ZERO else math.inf

    def in_support(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x >= 0) & (x <= self.upper_endpoint)

    def cdf(self, x):
        return gpd_cdf(x, self)

    def sf(self, x):
        return _gpd_sf(np.asarray(x, dtype=float), self.xi, self.beta)

    def ppf(self, p):
        return gpd_quantile(p, self)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = self.xi * x / self.beta
        if abs(self.xi) < XI_ZERO:
            return -math.log(self.beta) - x / self.beta
        return -math.log(self.beta) - (1.0 + 1.0 / self.xi) * np.log1p(z)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(self.in_support(x), np.exp(self.logpdf(np.clip(x, 0, None))), 0.0)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, size=None):
        return _gpd_ppf(rng.random(size), self.xi, self.beta)

    def mean(self) -> float:
        if self.xi >= 1:
            return math.inf
        return self.beta / (1.0 - self.xi)


def _gpd_log_sf(x: np.ndarray, xi: float, beta: float) -> np.ndarray:
    if abs(xi) < XI_ZERO:
        return -x / beta
    # rounding can push the argument just past -1 at the upper endpoint
    with np.errstate(divide="ignore"):
        return -np.log1p(np.maximum(xi * x / beta, -1.0)) / xi


def _gpd_sf(x: np.ndarray, xi: float, beta: float) -> np.ndarray:
    return np.exp(_gpd_log_sf(x, xi, beta))


def _gpd_ppf(p, xi: float, beta: float):
    p = np.asarray(p, dtype=float)
    log_tail = np.log1p(-p)
    if abs(xi) < XI_ZERO:
        out = -beta * log_tail
    else:
        out = beta * np.expm1(-xi * log_tail) / xi
    return out if out.ndim else float(out)


def gpd_cdf(x, params: GpdParams):
    """Generalized Pareto CDF ``G_{xi,beta}(x)``.

    Raises:
        DomainError: if any ``x`` lies outside the support.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(params.in_support(arr)):
        raise DomainError(f"x outside GPD support [0, {params.upper_endpoint}]")
    out = np.clip(-np.expm1(_gpd_log_sf(arr, params.xi, params.beta)), 0.0, 1.0)
    return out if out.ndim else float(out)


def gpd_quantile(p, params: GpdParams):
    """Inverse of :func:`gpd_cdf` for ``0 <= p < 1``."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr >= 1)) or np.any(np.isnan(arr)):
        raise DomainError("GPD quantile requires 0 <= p < 1")
    return _gpd_ppf(arr, params.xi, params.beta)


@dataclass(frozen=True)
class ShiftedGpd:
    """Death counts above ``threshold`` with GPD excesses.

    The CDF treats the mark as continuous, ``G(x - threshold)``; the sampler
    returns integer counts ``threshold + ceil(Y)`` so that every draw
    strictly exceeds the threshold.
    """

    threshold: int
    gpd: GpdParams

    discrete = True

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        y = np.clip(x - self.threshold, 0.0, self.gpd.upper_endpoint)
        out = -np.expm1(_gpd_log_sf(y, self.gpd.xi, self.gpd.beta))
        return out if out.ndim else float(out)

    def ppf(self, p):
        return self.threshold + np.ceil(_gpd_ppf(p, self.gpd.xi, self.gpd.beta))

    def sample(self, rng: np.random.Generator, size=None):
        y = self.gpd.sample(rng, size)
        # an exact zero excess would sit on the threshold
        out = self.threshold + np.maximum(np.ceil(y), 1.0)
        return out if np.ndim(out) else float(out)


# --------------------------------------------------------------------------
# generalized extreme value
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GevParams:
    xi: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"GEV scale must be positive, got {self.sigma}")

    def cdf(self, x):
        return gev_cdf(x, self)


def gev_cdf(x, params: GevParams):
    """GEV CDF ``exp(-(1 + xi (x - mu)/sigma)^(-1/xi))``, Gumbel at ``xi = 0``."""
    z = (np.asarray(x, dtype=float) - params.mu) / params.sigma
    if abs(params.xi) < XI_ZERO:
        out = np.exp(-np.exp(-z))
    else:
        base = 1.0 + params.xi * z
        if np.any(base <= 0):
            raise DomainError("x outside GEV support (1 + xi (x - mu)/sigma <= 0)")
        out = np.exp(-np.exp(-np.log1p(params.xi * z) / params.xi))
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# count and proportion laws
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PoissonDist:
    mean: float

    discrete = True

    def __post_init__(self):
        if self.mean < 0:
            raise DomainError("Poisson mean must be non-negative")

    def cdf(self, x):
        return stats.poisson.cdf(np.floor(x), self.mean)

    def ppf(self, p):
        return stats.poisson.ppf(p, self.mean)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.poisson(self.mean, size)


@dataclass(frozen=True)
class NegBinParams:
    """Negative binomial with ``P(N=k) = C(k+r-1, k) p^r (1-p)^k``, ``k >= 0``.

    ``r`` may be any positive real. Mean is ``r (1-p) / p``.
    """

    r: float
    p: float

    discrete = True

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"negative binomial size must be positive, got {self.r}")
        if not 0 < self.p < 1:
            raise DomainError(f"negative binomial p must be in (0, 1), got {self.p}")

    @property
    def mean(self) -> float:
        return self.r * (1 - self.p) / self.p

    def logpmf(self, k):
        return stats.nbinom.logpmf(k, self.r, self.p)

    def cdf(self, x):
        return stats.nbinom.cdf(np.floor(x), self.r, self.p)

    def ppf(self, q):
        return stats.nbinom.ppf(q, self.r, self.p)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.negative_binomial(self.r, self.p, size)


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    discrete = False

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError("beta distribution parameters must be positive")

    @classmethod
    def from_mean(cls, mean: float, concentration: float) -> BetaParams:
        """Beta law with the given mean and ``alpha + beta = concentration``."""
        return cls(mean * concentration, (1 - mean) * concentration)

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def cdf(self, x):
        return stats.beta.cdf(x, self.alpha, self.beta)

    def ppf(self, p):
        return stats.beta.ppf(p, self.alpha, self.beta)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.beta(self.alpha, self.beta, size)


@dataclass(frozen=True)
class DiscreteDist:
    """Finite categorical law on ``values`` with probabilities ``probs``."""

    values: tuple
    probs: tuple

    discrete = True

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise DomainError("values and probs must be non-empty and of equal length")
        if any(p < 0 for p in self.probs) or not math.isclose(sum(self.probs), 1.0, abs_tol=1e-9):
            raise DomainError("discrete probabilities must be non-negative and sum to one")
        if list(self.values) != sorted(self.values):
            raise DomainError("discrete values must be sorted ascending")

    @property
    def _cum(self) -> np.ndarray:
        c = np.cumsum(self.probs)
        c[-1] = 1.0
        return c

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.values, dtype=float), x, side="right")
        out = np.concatenate([[0.0], self._cum])[idx]
        return out if out.ndim else float(out)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        idx = np.searchsorted(self._cum, p, side="left")
        out = np.asarray(self.values, dtype=float)[np.minimum(idx, len(self.values) - 1)]
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, size=None):
        return self.ppf(_uniform_open_left(rng, size))


# --------------------------------------------------------------------------
# truncation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Truncated:
    """Base law conditioned on ``lower < X <= upper``.

    For count laws the support is the integer range ``[lower + 1, upper]``.
    """

    base: Distribution
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise DomainError("truncation requires lower < upper")
        if self._mass <= 0:
            raise DomainError("base distribution puts no mass on the truncation interval")

    @property
    def discrete(self) -> bool:
        return bool(getattr(self.base, "discrete", False))

    @property
    def _g_lo(self) -> float:
        return float(self.base.cdf(self.lower))

    @property
    def _mass(self) -> float:
        return float(self.base.cdf(self.upper)) - float(self.base.cdf(self.lower))

    def cdf(self, x):
        return truncated_cdf(x, self)

    def ppf(self, p):
        return truncated_quantile(p, self)

    def sample(self, rng: np.random.Generator, size=None):
        return self.ppf(_uniform_open_left(rng, size))


def truncated_cdf(x, t: Truncated):
    """``(G(clamp(x, a, b)) - G(a)) / (G(b) - G(a))``."""
    g_lo, mass = t._g_lo, t._mass
    clamped = np.clip(np.asarray(x, dtype=float), t.lower, t.upper)
    out = (np.asarray(t.base.cdf(clamped), dtype=float) - g_lo) / mass
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def truncated_quantile(p, t: Truncated):
    """``G^{-1}(G(a) + p (G(b) - G(a)))`` for ``0 <= p <= 1``."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise DomainError("truncated quantile requires 0 <= p <= 1")
    q = t._g_lo + arr * t._mass
    out = np.asarray(t.base.ppf(np.minimum(q, 1.0)), dtype=float)
    if t.discrete:
        lo = math.floor(t.lower) + 1
        out = np.where(arr == 0, t.lower, np.clip(out, lo, t.upper))
    else:
        out = np.clip(out, t.lower, t.upper)
    return out if out.ndim else float(out)


def sample(dist: Distribution, rng: np.random.Generator, size=None):
    """Draw from any distribution object in this module."""
    return dist.sample(rng, size)
