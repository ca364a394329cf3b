"""Policy-level book of insureds and risk sums.

Amounts are held as integer cents so that claim sums and reinsurance
splits add up exactly. Policies are stored column-wise; each insured maps
to the slice of policies written on their life.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Policy",
    "Portfolio",
    "PortfolioSpec",
    "PortfolioError",
    "generate_portfolio",
    "read_portfolio_csv",
    "write_portfolio_csv",
    "eur_to_cents",
    "cents_to_eur",
    "portfolio_summary",
]

HEADER = ("policy_id", "insured_id", "risk_sum_eur", "inception_date", "maturity_date")
EPOCH = np.datetime64("1970-01-01", "D")


class PortfolioError(ValueError):
    """Malformed portfolio data or infeasible generator settings."""


def eur_to_cents(amount) -> int:
    try:
        d = Decimal(str(amount))
    except InvalidOperation as exc:
        raise PortfolioError(f"not a monetary amount: {amount!r}") from exc
    cents = d * 100
    if cents != cents.to_integral_value():
        raise PortfolioError(f"amount {amount} has sub-cent precision")
    return int(cents)


def cents_to_eur(cents) -> float:
    return np.asarray(cents, dtype=np.int64) / 100.0


def _day(d: dt.date | str) -> int:
    return int((np.datetime64(d, "D") - EPOCH).astype(np.int64))


@dataclass(frozen=True)
class Policy:
    policy_id: str
    insured_id: str
    risk_sum_cents: int
    inception_date: dt.date
    maturity_date: dt.date

    @property
    def risk_sum_eur(self) -> float:
        return self.risk_sum_cents / 100.0


@dataclass(frozen=True, eq=False)
class Portfolio:
    """Column-wise policy table.

    ``insured`` holds a dense 0-based insured index per policy; the original
    insured identifiers are in ``insured_ids``. Dates are day numbers since
    1970-01-01.
    """

    policy_ids: np.ndarray
    insured: np.ndarray
    insured_ids: np.ndarray
    risk_sum_cents: np.ndarray
    inception_day: np.ndarray
    maturity_day: np.ndarray
    _order: np.ndarray = field(init=False, repr=False)
    _offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.policy_ids.size
        for name in ("insured", "risk_sum_cents", "inception_day", "maturity_day"):
            if getattr(self, name).shape != (n,):
                raise PortfolioError(f"column {name} has the wrong length")
        if n and np.any(self.risk_sum_cents <= 0):
            raise PortfolioError("risk sums must be positive")
        if np.any(self.maturity_day < self.inception_day):
            raise PortfolioError("maturity precedes inception")
        if n and (self.insured.min() < 0 or self.insured.max() >= self.insured_ids.size):
            raise PortfolioError("insured index out of range")
        order = np.argsort(self.insured, kind="stable")
        offsets = np.zeros(self.insured_ids.size + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.insured, minlength=self.insured_ids.size), out=offsets[1:])
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_offsets", offsets)

    @classmethod
    def from_columns(cls, policy_ids, insured_ids, risk_sum_cents, inception_day, maturity_day) -> Portfolio:
        uniq, inv = np.unique(np.asarray(insured_ids).astype(str), return_inverse=True)
        return cls(
            np.asarray(policy_ids).astype(str),
            inv.astype(np.int64),
            uniq,
            np.asarray(risk_sum_cents, dtype=np.int64),
            np.asarray(inception_day, dtype=np.int64),
            np.asarray(maturity_day, dtype=np.int64),
        )

    @classmethod
    def from_policies(cls, policies: Iterable[Policy]) -> Portfolio:
        ps = list(policies)
        return cls.from_columns(
            [p.policy_id for p in ps],
            [p.insured_id for p in ps],
            [p.risk_sum_cents for p in ps],
            [_day(p.inception_date) for p in ps],
            [_day(p.maturity_date) for p in ps],
        )

    @property
    def n_policies(self) -> int:
        return int(self.policy_ids.size)

    @property
    def n_insureds(self) -> int:
        return int(self.insured_ids.size)

    @property
    def total_risk_sum_cents(self) -> int:
        return int(self.risk_sum_cents.sum())

    def policy(self, i: int) -> Policy:
        return Policy(
            str(self.policy_ids[i]),
            str(self.insured_ids[self.insured[i]]),
            int(self.risk_sum_cents[i]),
            (EPOCH + int(self.inception_day[i])).astype(dt.date),
            (EPOCH + int(self.maturity_day[i])).astype(dt.date),
        )

    def policies_of(self, insureds: np.ndarray) -> np.ndarray:
        """Indices of all policies on the given insureds, grouped by insured in input order."""
        insureds = np.asarray(insureds, dtype=np.int64)
        if insureds.size == 0:
            return np.empty(0, dtype=np.int64)
        start = self._offsets[insureds]
        length = self._offsets[insureds + 1] - start
        if np.all(length == 1):
            return self._order[start]
        idx = np.repeat(start - np.cumsum(length) + length, length) + np.arange(int(length.sum()))
        return self._order[idx]

    def in_force(self, policies: np.ndarray, day: float) -> np.ndarray:
        """Mask of policies covering a death on (fractional) day number ``day``.

        A policy covers its maturity date in full.
        """
        return (self.inception_day[policies] <= day) & (day < self.maturity_day[policies] + 1)


@dataclass(frozen=True)
class PortfolioSpec:
    """Recipe for a synthetic book with one policy per insured.

    Risk sums mix point masses at round values (``atoms``, weights relative
    to ``atom_share``), a lognormal body and a Pareto tail above
    ``tail_start``. Continuous draws are rounded to ``rounding`` EUR and
    clipped to ``[min_sum, max_sum]``. With ``pin_extremes`` and a
    continuous part, the smallest and largest draws are set to the two
    bounds so the book spans exactly that range.
    """

    count: int = 400_000
    min_sum: float = 5_000
    max_sum: float = 10_000_000
    atoms: Mapping[float, float] = field(
        default_factory=lambda: {
            10_000: 0.10,
            20_000: 0.22,
            30_000: 0.10,
            50_000: 0.26,
            100_000: 0.22,
            150_000: 0.04,
            200_000: 0.06,
        }
    )
    atom_share: float = 0.30
    body_median: float = 42_000
    body_sigma: float = 0.65
    tail_share: float = 0.025
    tail_start: float = 200_000
    tail_alpha: float = 2.0
    rounding: float = 50
    pin_extremes: bool = True
    start_date: dt.date = dt.date(2025, 1, 1)
    max_age_years: float = 20.0
    min_term_years: float = 1.0
    max_term_years: float = 30.0

    def validate(self) -> None:
        if self.count < 0:
            raise PortfolioError("count must be >= 0")
        if not 0 < self.min_sum <= self.max_sum:
            raise PortfolioError("need 0 < min_sum <= max_sum")
        if not (0 <= self.atom_share and 0 <= self.tail_share and self.atom_share + self.tail_share <= 1):
            raise PortfolioError("atom and tail shares must be non-negative and sum to at most 1")
        if self.atom_share > 0:
            if not self.atoms or any(w < 0 for w in self.atoms.values()) or sum(self.atoms.values()) <= 0:
                raise PortfolioError("atom weights must be non-negative with positive total")
            if any(not self.min_sum <= a <= self.max_sum for a in self.atoms):
                raise PortfolioError("atoms must lie within [min_sum, max_sum]")
        if self.body_median <= 0 or self.body_sigma < 0:
            raise PortfolioError("lognormal body needs positive median and non-negative sigma")
        if self.tail_share > 0 and (self.tail_alpha <= 0 or self.tail_start <= 0):
            raise PortfolioError("Pareto tail needs positive alpha and start")
        if self.rounding <= 0:
            raise PortfolioError("rounding step must be positive")
        if not 0 < self.min_term_years <= self.max_term_years:
            raise PortfolioError("policy terms must satisfy 0 < min <= max")


def _draw_sums(spec: PortfolioSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.count
    kind = rng.choice(3, size=n, p=[spec.atom_share, spec.tail_share, 1.0 - spec.atom_share - spec.tail_share])
    out = np.empty(n, dtype=float)
    sel = kind == 0
    if sel.any():
        vals = np.array(list(spec.atoms), dtype=float)
        w = np.array(list(spec.atoms.values()), dtype=float)
        out[sel] = rng.choice(vals, size=int(sel.sum()), p=w / w.sum())
    sel = kind == 1
    if sel.any():
        out[sel] = spec.tail_start * (1.0 - rng.random(int(sel.sum()))) ** (-1.0 / spec.tail_alpha)
    sel = kind == 2
    if sel.any():
        out[sel] = spec.body_median * np.exp(spec.body_sigma * rng.standard_normal(int(sel.sum())))
    cont = kind != 0
    out[cont] = np.round(out[cont] / spec.rounding) * spec.rounding
    out = np.clip(out, spec.min_sum, spec.max_sum)
    if spec.pin_extremes and spec.atom_share < 1 and n >= 2:
        if out.min() > spec.min_sum:
            out[np.argmin(out)] = spec.min_sum
        if out.max() < spec.max_sum:
            out[np.argmax(out)] = spec.max_sum
    return np.round(out * 100).astype(np.int64)


def generate_portfolio(spec: PortfolioSpec, rng: np.random.Generator) -> Portfolio:
    """Synthetic book with one policy per insured.

    Raises:
        PortfolioError: for an infeasible spec.
    """
    spec.validate()
    n = spec.count
    sums = _draw_sums(spec, rng) if n else np.empty(0, dtype=np.int64)
    start = _day(spec.start_date)
    inception = start - np.floor(rng.random(n) * spec.max_age_years * 365.25).astype(np.int64)
    term = spec.min_term_years + rng.random(n) * (spec.max_term_years - spec.min_term_years)
    maturity = start + np.ceil(term * 365.25).astype(np.int64)
    width = max(len(str(n)), 6)
    ids = np.array([f"P{i:0{width}d}" for i in range(1, n + 1)], dtype=str)
    insured = np.array([f"I{i:0{width}d}" for i in range(1, n + 1)], dtype=str)
    return Portfolio(ids, np.arange(n, dtype=np.int64), insured, sums, inception, maturity)


def _format_cents(c: int) -> str:
    return f"{c // 100}.{c % 100:02d}"


def write_portfolio_csv(portfolio: Portfolio, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    inc = (EPOCH + portfolio.inception_day).astype(str)
    mat = (EPOCH + portfolio.maturity_day).astype(str)
    ins = portfolio.insured_ids[portfolio.insured]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for row in zip(portfolio.policy_ids, ins, portfolio.risk_sum_cents, inc, mat):
            w.writerow((row[0], row[1], _format_cents(int(row[2])), row[3], row[4]))
    return path


def read_portfolio_csv(path: str | Path) -> Portfolio:
    """Parse a portfolio CSV; errors name the offending line."""
    path = Path(path)
    pids, iids, sums, inc, mat = [], [], [], [], []
    seen: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise PortfolioError(f"{path}:1: expected header {','.join(HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(HEADER):
                raise PortfolioError(f"{path}:{lineno}: expected {len(HEADER)} fields, got {len(row)}")
            pid, iid, amount, d0, d1 = (c.strip() for c in row)
            if pid in seen:
                raise PortfolioError(f"{path}:{lineno}: duplicate policy id {pid}")
            seen.add(pid)
            try:
                cents = eur_to_cents(amount)
                a, b = _day(dt.date.fromisoformat(d0)), _day(dt.date.fromisoformat(d1))
            except (PortfolioError, ValueError) as exc:
                raise PortfolioError(f"{path}:{lineno}: {exc}") from exc
            if cents <= 0:
                raise PortfolioError(f"{path}:{lineno}: risk sum must be positive")
            if b < a:
                raise PortfolioError(f"{path}:{lineno}: maturity precedes inception")
            pids.append(pid)
            iids.append(iid)
            sums.append(cents)
            inc.append(a)
            mat.append(b)
    return Portfolio.from_columns(pids, iids, sums, inc, mat)


def portfolio_summary(portfolio: Portfolio) -> dict:
    s = cents_to_eur(portfolio.risk_sum_cents)
    if s.size == 0:
        return {"count": 0}
    return {
        "count": portfolio.n_policies,
        "insureds": portfolio.n_insureds,
        "min": float(s.min()),
        "max": float(s.max()),
        "mean": float(s.mean()),
        "total": float(s.sum()),
        "median": float(np.median(s)),
    }

