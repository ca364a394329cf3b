"""Threshold-choice and homogeneity diagnostics.

Everything here returns plain data (lists of dataclasses or arrays) for
external plotting; :func:`write_csv` dumps them with fixed headers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .distributions import GpdParams
from .fitting import ExcessSample, fit_gpd

__all__ = [
    "MeanExcessPoint",
    "StabilityScanRow",
    "KsResult",
    "mean_excess_curve",
    "default_threshold_grid",
    "stability_scan",
    "kolmogorov_sf",
    "ks_uniformity",
    "adjacent_pairs",
    "qq_pp_data",
    "write_csv",
]


@dataclass(frozen=True)
class MeanExcessPoint:
    u: float
    e_n: float
    count: int


@dataclass(frozen=True)
class StabilityScanRow:
    u: float
    xi: float
    beta: float
    beta_star: float
    count: int
    converged: bool = True


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    transformed: np.ndarray
    few_points: bool


def mean_excess_curve(values, thresholds: Iterable[float]) -> list[MeanExcessPoint]:
    """Sample mean excess ``e_n(u)``; thresholds at or above the maximum are skipped."""
    x = np.asarray(values, dtype=float)
    out = []
    for u in thresholds:
        above = x[x > u]
        if above.size == 0:
            continue
        out.append(MeanExcessPoint(float(u), float((above - u).sum() / above.size), int(above.size)))
    return out


def default_threshold_grid(values) -> list[int]:
    """Every integer from the sample minimum up to the fifth-largest value."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size < 5:
        return []
    return list(range(int(math.floor(x[0])), int(math.floor(x[-5])) + 1))


def stability_scan(values, thresholds: Iterable[float] | None = None) -> list[StabilityScanRow]:
    """GPD fits over a threshold grid, with ``beta* = beta_u - xi u``.

    Thresholds that leave fewer than five excesses are skipped; fits that
    fail to converge are kept and flagged.
    """
    x = np.asarray(values, dtype=float)
    grid = default_threshold_grid(x) if thresholds is None else thresholds
    rows = []
    for u in grid:
        sample = ExcessSample.from_values(x, u)
        if sample.count < 5:
            continue
        fit = fit_gpd(sample)
        xi, beta = float(fit.params[0]), float(fit.params[1])
        rows.append(StabilityScanRow(float(u), xi, beta, beta - xi * u, sample.count, fit.converged))
    return rows


def kolmogorov_sf(x: float) -> float:
    """Survival function of the limiting Kolmogorov distribution."""
    if x < 1e-8:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = (-1) ** (k - 1) * math.exp(-2.0 * k * k * x * x)
        total += term
        if abs(term) < 1e-16:
            break
    return min(max(2.0 * total, 0.0), 1.0)


def ks_uniformity(waits: Sequence[float], rate: float) -> KsResult:
    """K-S test that ``U_k = 1 - exp(-rate T_k)`` are uniform on [0, 1).

    The p-value uses the limiting Kolmogorov law at the small-sample
    adjusted argument ``(sqrt(n) + 0.12 + 0.11/sqrt(n)) D``.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    t = np.asarray(waits, dtype=float)
    if np.any(t < 0):
        raise ValueError("waiting times must be non-negative")
    u = -np.expm1(-rate * t)
    n = u.size
    if n == 0:
        return KsResult(math.nan, math.nan, u, True)
    s = np.sort(u)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - s), np.max(s - (i - 1) / n)))
    en = math.sqrt(n)
    return KsResult(d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d), u, n < 5)


def adjacent_pairs(u: Sequence[float]) -> list[tuple[float, float]]:
    """Consecutive pairs ``(U_k, U_{k+1})``."""
    vals = [float(v) for v in u]
    return list(zip(vals[:-1], vals[1:]))


def qq_pp_data(excesses, params: GpdParams) -> tuple[np.ndarray, np.ndarray]:
    """Probability-plot and quantile-plot points at positions ``(i - 0.5)/n``.

    Returns two ``(n, 2)`` arrays: ``(empirical p, model CDF at the sorted
    data)`` and ``(model quantile, sorted data)``.
    """
    y = np.sort(np.asarray(excesses, dtype=float))
    n = y.size
    if n == 0:
        return np.empty((0, 2)), np.empty((0, 2))
    pos = (np.arange(1, n + 1) - 0.5) / n
    pp = np.column_stack([pos, np.clip(params.cdf(y), 0.0, 1.0)])
    qq = np.column_stack([params.ppf(pos), y])
    return pp, qq


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable) -> Path:
    """Write ``rows`` (dataclasses, mappings or sequences) under ``header``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            if hasattr(row, "__dataclass_fields__"):
                d = asdict(row)
                w.writerow([d[h] for h in header])
            elif isinstance(row, dict):
                w.writerow([row[h] for h in header])
            else:
                w.writerow(list(row))
    return path
