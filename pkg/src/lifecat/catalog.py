"""Dated accident events with death counts.

Time is measured in years from the start of the observation window, with
each calendar year counted as exactly one unit; an event is placed at the
middle of its day. A window of whole calendar years therefore has an
integer length.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .fitting import ExcessSample
from .pointprocess import PotData

__all__ = ["CatalogError", "EventCatalog", "read_catalog", "write_catalog", "year_position"]

HEADER = ("date", "deaths", "country")


class CatalogError(ValueError):
    """Unreadable or inconsistent event catalog."""


def _days_in_year(year: int) -> int:
    return 366 if dt.date(year, 12, 31).timetuple().tm_yday == 366 else 365


def year_position(d: dt.date, origin_year: int) -> float:
    """Years elapsed from 1 January of ``origin_year`` to the start of day ``d``."""
    doy = d.timetuple().tm_yday - 1
    return (d.year - origin_year) + doy / _days_in_year(d.year)


@dataclass(frozen=True)
class EventCatalog:
    dates: tuple[dt.date, ...]
    deaths: np.ndarray
    countries: tuple[str, ...]
    start: dt.date
    end: dt.date

    def __post_init__(self):
        d = np.asarray(self.deaths)
        if len(self.dates) != d.size or len(self.countries) != d.size:
            raise CatalogError("dates, deaths and countries must have equal length")
        if d.size and (np.any(d <= 0) or np.any(d != np.round(d))):
            raise CatalogError("death counts must be positive integers")
        if self.end < self.start:
            raise CatalogError("window end precedes its start")
        if any(x < self.start or x > self.end for x in self.dates):
            raise CatalogError(f"event dates must lie in the window {self.start}..{self.end}")
        order = sorted(range(d.size), key=lambda i: self.dates[i])
        object.__setattr__(self, "dates", tuple(self.dates[i] for i in order))
        object.__setattr__(self, "countries", tuple(self.countries[i] for i in order))
        object.__setattr__(self, "deaths", d[order].astype(np.int64) if d.size else d.astype(np.int64))

    def __len__(self) -> int:
        return int(self.deaths.size)

    @property
    def _offset(self) -> float:
        return year_position(self.start, self.start.year)

    @property
    def span(self) -> float:
        """Window length in years, end date inclusive."""
        return year_position(self.end + dt.timedelta(days=1), self.start.year) - self._offset

    @property
    def times(self) -> np.ndarray:
        """Event times in years from the window start (middle of the day)."""
        off = self._offset
        return np.array(
            [year_position(d, self.start.year) + 0.5 / _days_in_year(d.year) - off for d in self.dates], dtype=float
        )

    def select(self, mask) -> EventCatalog:
        mask = np.asarray(mask, dtype=bool)
        idx = np.flatnonzero(mask)
        return EventCatalog(
            tuple(self.dates[i] for i in idx),
            self.deaths[idx],
            tuple(self.countries[i] for i in idx),
            self.start,
            self.end,
        )

    def country(self, *tags: str) -> EventCatalog:
        return self.select([c in tags for c in self.countries])

    def above(self, threshold: float) -> EventCatalog:
        return self.select(self.deaths > threshold)

    def waiting_times(self, threshold: float | None = None) -> np.ndarray:
        """Gaps between consecutive events (the first measured from the window start)."""
        cat = self if threshold is None else self.above(threshold)
        t = cat.times
        return np.diff(np.concatenate([[0.0], t]))

    def excess_sample(self, threshold: float) -> ExcessSample:
        return ExcessSample.from_values(self.deaths, threshold, self.span)

    def pot_data(self, threshold: float) -> PotData:
        cat = self.above(threshold)
        return PotData(cat.times, cat.deaths.astype(float), threshold, self.span)


def read_catalog(path: str | Path, start: dt.date | None = None, end: dt.date | None = None) -> EventCatalog:
    """Parse a ``date,deaths,country`` CSV.

    The window defaults to 1 January of the first event year through
    31 December of the last.

    Raises:
        CatalogError: naming the file and line of the first bad record, or
            when the file holds no events.
    """
    path = Path(path)
    dates, deaths, countries = [], [], []
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise CatalogError(f"{path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CatalogError(f"{path}: empty file")
        if tuple(h.strip().lower() for h in header) != HEADER:
            raise CatalogError(f"{path}:1: expected header {','.join(HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise CatalogError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                d = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise CatalogError(f"{path}:{lineno}: bad date {row[0]!r}") from None
            try:
                n = int(row[1].strip())
            except ValueError:
                raise CatalogError(f"{path}:{lineno}: death count must be an integer, got {row[1]!r}") from None
            if n <= 0:
                raise CatalogError(f"{path}:{lineno}: death count must be positive")
            dates.append(d)
            deaths.append(n)
            countries.append(row[2].strip())
    if not dates:
        raise CatalogError(f"{path}: no events")
    start = start or dt.date(min(dates).year, 1, 1)
    end = end or dt.date(max(dates).year, 12, 31)
    bad = [d for d in dates if d < start or d > end]
    if bad:
        raise CatalogError(f"{path}: event on {bad[0]} outside the window {start}..{end}")
    return EventCatalog(tuple(dates), np.array(deaths, dtype=np.int64), tuple(countries), start, end)


def write_catalog(path: str | Path, dates: Sequence[dt.date], deaths: Sequence[int], countries: Sequence[str] | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    countries = countries or ["XX"] * len(dates)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for d, n, c in zip(dates, deaths, countries):
            w.writerow((d.isoformat(), int(n), c))
    return path
