"""Return levels, return periods, VaR and expected shortfall from a threshold model.

The annual exceedance probability of the threshold is
``p_u = 1 - exp(-lambda_u)``; above ``u`` the tail is
``P(X > x) = p_u (1 + xi (x - u)/beta)^(-1/xi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .distributions import XI_ZERO, DomainError, GpdParams
from .fitting import ConfidenceInterval, ExcessSample, _gpd_loglik_arr, profile_interval

__all__ = [
    "TailModel",
    "var",
    "es",
    "return_level",
    "return_period",
    "return_level_ci",
    "return_level_table",
    "round_sig",
]


@dataclass(frozen=True)
class TailModel:
    """Threshold ``u`` with GPD excesses and annual exceedance intensity ``lam``.

    ``cov`` optionally holds the 3x3 covariance of ``(lam, xi, beta)``.
    """

    u: float
    gpd: GpdParams
    lam: float
    cov: np.ndarray | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise DomainError("exceedance intensity must be positive")

    @property
    def p_exceed(self) -> float:
        return -math.expm1(-self.lam)

    def with_params(self, lam: float, xi: float, beta: float) -> TailModel:
        return TailModel(self.u, GpdParams(xi, beta), lam, self.cov)


def _var(alpha: float, u: float, xi: float, beta: float, pbar: float) -> float:
    tail = 1.0 - alpha
    if not 0 < tail <= pbar:
        raise DomainError(f"level {alpha} puts the quantile below the threshold (need 1 - alpha <= {pbar:.6g})")
    if abs(xi) < XI_ZERO:
        return u + beta * math.log(pbar / tail)
    return u + beta / xi * math.expm1(-xi * math.log(tail / pbar))


def var(alpha: float, m: TailModel) -> float:
    """Value-at-Risk at level ``alpha``."""
    return _var(alpha, m.u, m.gpd.xi, m.gpd.beta, m.p_exceed)


def es(alpha: float, m: TailModel) -> float:
    """Expected shortfall ``VaR/(1 - xi) + (beta - xi u)/(1 - xi)``.

    Raises:
        DomainError: when ``xi >= 1`` (the mean does not exist).
    """
    xi = m.gpd.xi
    if xi >= 1:
        raise DomainError(f"expected shortfall does not exist for xi = {xi} >= 1")
    return var(alpha, m) / (1.0 - xi) + (m.gpd.beta - xi * m.u) / (1.0 - xi)


def return_level(t: float, m: TailModel) -> float:
    """Level exceeded on average once every ``t`` years."""
    if not t > 0:
        raise DomainError("return period must be positive")
    if 1.0 / t > m.p_exceed:
        raise DomainError(
            f"return period {t:g} is shorter than 1/p_u = {1.0 / m.p_exceed:.4g} years, "
            f"so its level would lie below the threshold u = {m.u:g}"
        )
    return var(1.0 - 1.0 / t, m)


def return_period(x: float, m: TailModel) -> float:
    """Mean recurrence time, in years, of an event larger than ``x``."""
    if x < m.u:
        raise DomainError(f"return period defined only at or above the threshold {m.u}")
    sf = m.p_exceed * float(m.gpd.sf(x - m.u))
    return math.inf if sf == 0 else 1.0 / sf


def _rl_params(t, u, xi, beta, pbar):
    return _var(1.0 - 1.0 / t, u, xi, beta, pbar)


def return_level_ci(
    t: float,
    m: TailModel,
    level: float = 0.95,
    method: str = "delta",
    sample: ExcessSample | None = None,
) -> ConfidenceInterval:
    """Confidence interval for the ``t``-year return level.

    ``delta``: finite-difference gradient in ``(lam, xi, beta)`` against
    ``m.cov``; the interval is symmetric and may go negative.
    ``profile``: the GPD likelihood of ``sample`` reparametrized by the
    return level and profiled over ``xi``, with ``lam`` held at its estimate.
    """
    est = return_level(t, m)
    if method == "delta":
        if m.cov is None:
            raise ValueError("delta-method interval needs the parameter covariance")
        theta = np.array([m.lam, m.gpd.xi, m.gpd.beta])

        def f(th):
            return _rl_params(t, m.u, th[1], th[2], -math.expm1(-th[0]))

        grad = np.empty(3)
        for i in range(3):
            h = 1e-6 * max(abs(theta[i]), 1e-8)
            up, dn = theta.copy(), theta.copy()
            up[i] += h
            dn[i] -= h
            grad[i] = (f(up) - f(dn)) / (2.0 * h)
        se = math.sqrt(max(float(grad @ np.asarray(m.cov) @ grad), 0.0))
        z = stats.norm.ppf(0.5 + level / 2.0)
        return ConfidenceInterval(est, est - z * se, est + z * se, level, "delta")
    if method != "profile":
        raise ValueError(f"unknown method {method!r}")
    if sample is None:
        raise ValueError("profile interval needs the excess sample")

    pbar = m.p_exceed
    y = sample.excesses
    u = m.u
    log_ratio = math.log((1.0 / t) / pbar)  # negative when t > 1/pbar

    def loglik(th):
        # th = (return level, xi); beta recovered from the return-level identity
        x_t, xi = th
        if x_t <= u:
            return -math.inf
        if abs(xi) < XI_ZERO:
            beta = (x_t - u) / (-log_ratio)
        else:
            beta = (x_t - u) * xi / math.expm1(-xi * log_ratio)
        return _gpd_loglik_arr(xi, beta, y)

    mle = np.array([est, m.gpd.xi])
    se_guess = None
    if m.cov is not None:
        se_guess = return_level_ci(t, m, level, "delta").upper - est
        se_guess /= stats.norm.ppf(0.5 + level / 2.0)
    ci = profile_interval(
        loglik,
        mle,
        0,
        level,
        se=se_guess or 0.25 * (est - u),
        bracket_se=20.0,
        expand_to_se=2000.0,
        nuisance_step=[0.1],
    )
    return ConfidenceInterval(ci.estimate, ci.lower, ci.upper, level, "profile", ci.open_lower, ci.open_upper)


def round_sig(x: float, digits: int = 2) -> float:
    """Round to ``digits`` significant figures."""
    if x == 0 or not math.isfinite(x):
        return x
    return round(x, digits - 1 - int(math.floor(math.log10(abs(x)))))


def return_level_table(periods: Sequence[float], m: TailModel, level: float = 0.95, sample: ExcessSample | None = None) -> list[dict]:
    """Rows ``{t, estimate, lo, hi, method}`` for the point estimate and available intervals."""
    rows = []
    for t in periods:
        est = return_level(t, m)
        rows.append({"t": t, "estimate": est, "lo": "", "hi": "", "method": "point"})
        if m.cov is not None:
            ci = return_level_ci(t, m, level, "delta")
            rows.append({"t": t, "estimate": est, "lo": ci.lower, "hi": ci.upper, "method": "delta"})
        if sample is not None:
            ci = return_level_ci(t, m, level, "profile", sample)
            rows.append({"t": t, "estimate": est, "lo": ci.lower, "hi": ci.upper, "method": "profile"})
    return rows
