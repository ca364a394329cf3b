"""Excess-of-loss recoveries on simulated claim paths.

All amounts are integer cents. Recoveries are allocated to events in
chronological order, so ``recovered + after == gross`` holds exactly per
event and per path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .simengine import PathResult

__all__ = [
    "QUANTILE_GRID",
    "PerRiskXL",
    "PerOccXL",
    "StopLoss",
    "RecoveryResult",
    "layer",
    "per_risk_recover",
    "per_occ_recover",
    "stop_loss_recover",
    "PriceSummary",
    "price_summary",
    "write_table",
]

QUANTILE_GRID = (0.5, 0.75, 0.9, 0.95, 0.99, 0.995, 0.999, 0.9995, 0.9999, 0.99995, 0.99999)

UNLIMITED = 2**62


def layer(c, retention, limit):
    """``min(max(c - retention, 0), limit)``; works elementwise on arrays."""
    if np.ndim(c):
        return np.minimum(np.maximum(np.asarray(c) - retention, 0), limit)
    return min(max(c - retention, 0), limit)


def _cap(x) -> int:
    return UNLIMITED if x is None or (isinstance(x, float) and math.isinf(x)) else int(x)


@dataclass(frozen=True)
class RecoveryResult:
    per_event: np.ndarray
    gross: int

    @property
    def recovered(self) -> int:
        return int(self.per_event.sum())

    @property
    def retained(self) -> int:
        return self.gross - self.recovered


def _aggregate_split(cum_layered: np.ndarray, aad: int, aal: int, aad_first: bool = True) -> np.ndarray:
    """Incremental payments from cumulative layered amounts.

    With ``aad_first`` the deductible comes off the running total before the
    aggregate limit caps what is paid; otherwise the running total is capped
    at the AAL and the deductible is taken out of the capped amount.
    """
    if aad_first:
        paid_cum = np.minimum(np.maximum(cum_layered - aad, 0), aal)
    else:
        paid_cum = np.maximum(np.minimum(cum_layered, aal) - aad, 0)
    return np.diff(np.concatenate([[0], paid_cum]))


@dataclass(frozen=True)
class PerRiskXL:
    """Per-policy layer ``limit xs retention`` with optional AAD and AAL (cents).

    ``aad_first`` (the default) retains the deductible before the AAL caps
    cumulative payments; set it to False to cap first.
    """

    retention: int
    limit: int
    aal: int | None = None
    aad: int = 0
    aad_first: bool = True

    def __post_init__(self):
        if self.retention < 0 or self.limit < 0 or self.aad < 0 or (self.aal is not None and self.aal < 0):
            raise ValueError("contract amounts must be non-negative")

    def recover(self, path: PathResult) -> RecoveryResult:
        return per_risk_recover(path, self)


@dataclass(frozen=True)
class PerOccXL:
    """Per-event layer with free reinstatements after full exhaustion and an AAL.

    Events with fewer than ``min_deaths`` deaths do not qualify for cover.
    """

    retention: int
    limit: int
    reinstatements: int = 0
    aal: int | None = None
    min_deaths: int = 0

    def __post_init__(self):
        if self.retention < 0 or self.limit < 0 or (self.aal is not None and self.aal < 0):
            raise ValueError("contract amounts must be non-negative")
        if self.reinstatements < 0:
            raise ValueError("reinstatements must be >= 0")

    def recover(self, path: PathResult) -> RecoveryResult:
        return per_occ_recover(path, self)


@dataclass(frozen=True)
class StopLoss:
    retention: int
    limit: int

    def __post_init__(self):
        if self.retention < 0 or self.limit < 0:
            raise ValueError("contract amounts must be non-negative")

    def recover(self, path: PathResult) -> RecoveryResult:
        return stop_loss_recover(path, self)


def per_risk_recover(path: PathResult, terms: PerRiskXL) -> RecoveryResult:
    """Layer each policy claim, then apply AAD and AAL to the running total.

    Claims are taken in event order and, within an event, in the order the
    victims were drawn.
    """
    gross = path.total
    n = len(path.events)
    if n == 0:
        return RecoveryResult(np.zeros(0, dtype=np.int64), 0)
    sizes = [e.claims.size for e in path.events]
    claims = np.concatenate([e.claims for e in path.events]) if sum(sizes) else np.zeros(0, dtype=np.int64)
    layered = layer(claims.astype(np.int64), terms.retention, terms.limit)
    paid = _aggregate_split(np.cumsum(layered), terms.aad, _cap(terms.aal), terms.aad_first)
    owner = np.repeat(np.arange(n), sizes)
    per_event = np.zeros(n, dtype=np.int64)
    np.add.at(per_event, owner, paid.astype(np.int64))
    return RecoveryResult(per_event, gross)


def per_occ_recover(path: PathResult, terms: PerOccXL) -> RecoveryResult:
    """Layer each qualifying event total against the cover still available.

    The cover starts at ``limit``; when a payment exhausts it completely and
    reinstatements remain, it is restored to ``limit`` for later events.
    Cumulative payments are capped at the AAL.
    """
    aal = _cap(terms.aal)
    available = terms.limit
    reinstatements = terms.reinstatements
    paid_total = 0
    out = np.zeros(len(path.events), dtype=np.int64)
    for j, e in enumerate(path.events):
        if e.deaths < terms.min_deaths:
            continue
        pay = min(layer(e.total, terms.retention, terms.limit), available, aal - paid_total)
        if pay <= 0:
            continue
        out[j] = pay
        paid_total += pay
        available -= pay
        if available == 0 and reinstatements > 0:
            available = terms.limit
            reinstatements -= 1
    return RecoveryResult(out, path.total)


def stop_loss_recover(path: PathResult, terms: StopLoss) -> RecoveryResult:
    """Layer on the path total; the payment is attributed to the events that trigger it."""
    totals = np.array([e.total for e in path.events], dtype=np.int64)
    if totals.size == 0:
        return RecoveryResult(totals, 0)
    paid = _aggregate_split(np.cumsum(totals), terms.retention, terms.limit)
    return RecoveryResult(paid, int(totals.sum()))


# --------------------------------------------------------------------------
# summary tables
# --------------------------------------------------------------------------


def _quantiles(x: np.ndarray, grid: Sequence[float]) -> np.ndarray:
    return np.quantile(x, grid, method="inverted_cdf")


@dataclass(frozen=True)
class PriceSummary:
    """Table rows (``Total Claims``, ``Reinsured``, ``After``) in EUR plus rate on line."""

    rows: dict[str, dict[str, float]]
    rate_on_line: float | None
    limit_eur: float | None

    @property
    def loss_cost(self) -> float:
        return self.rows["Reinsured"]["mean"]


def price_summary(
    gross: np.ndarray,
    recovered: np.ndarray,
    after: np.ndarray | None = None,
    limit: int | None = None,
    grid: Sequence[float] = QUANTILE_GRID,
) -> PriceSummary:
    """Mean, min, max and type-1 empirical quantiles of the three loss vectors (cents in, EUR out)."""
    gross = np.asarray(gross, dtype=np.int64)
    recovered = np.asarray(recovered, dtype=np.int64)
    after = gross - recovered if after is None else np.asarray(after, dtype=np.int64)
    if gross.size == 0:
        raise ValueError("empty loss vector")
    if not (gross.shape == recovered.shape == after.shape):
        raise ValueError("loss vectors must have equal length")
    if np.any(recovered + after != gross):
        raise ValueError("recovered + after must equal gross on every path")
    rows = {}
    for name, v in (("Total Claims", gross), ("Reinsured", recovered), ("After", after)):
        row = {"mean": float(v.mean()) / 100.0, "min": v.min() / 100.0, "max": v.max() / 100.0}
        for q, val in zip(grid, _quantiles(v, grid)):
            row[f"{q:g}"] = float(val) / 100.0
        rows[name] = row
    rol = None
    if limit:
        rol = rows["Reinsured"]["mean"] / (limit / 100.0)
    return PriceSummary(rows, rol, None if limit is None else limit / 100.0)


def write_table(summary: PriceSummary, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(next(iter(summary.rows.values())))
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row", *cols])
        for name, row in summary.rows.items():
            w.writerow([name, *(f"{row[c]:.2f}" for c in cols)])
    return path

