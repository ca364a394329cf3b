"""Three-component marked Poisson model of accidental deaths.

Component ``i`` produces events at annual rate ``lambda_i`` whose death
counts fall in ``(lo_i, hi_i]``; the intervals partition ``(0, inf)``.
Small and mid-sized counts follow bounded discrete laws, the largest
events a GPD above the top threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import (
    DiscreteDist,
    DomainError,
    GpdParams,
    NegBinParams,
    ShiftedGpd,
    Truncated,
)

__all__ = [
    "ComponentSpec",
    "CombinedCatModel",
    "CatEvent",
    "EventBatch",
    "default_model",
    "small_event_intensity",
    "conditional_size_cdf",
    "unconditional_size_cdf",
    "sample_events",
    "sample_event_batch",
]

MODES = ("superposed", "separate")


def _tabulate(marks, lo: float, hi: float) -> DiscreteDist:
    values = np.arange(math.floor(lo) + 1, math.floor(hi) + 1, dtype=float)
    cum = np.asarray(marks.cdf(values), dtype=float)
    probs = np.diff(np.concatenate([[0.0], cum]))
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    return DiscreteDist(tuple(map(float, values)), tuple(map(float, probs)))


@dataclass(frozen=True)
class ComponentSpec:
    """One event type: death counts in ``(lo, hi]`` at annual rate ``intensity``.

    ``marks`` is any distribution object from :mod:`lifecat.distributions`
    whose support lies in the interval. Bounded count laws are tabulated
    once so that sampling is a table lookup.
    """

    index: int
    lo: float
    hi: float
    intensity: float
    marks: object
    _table: DiscreteDist | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.intensity < 0 or not math.isfinite(self.intensity):
            raise DomainError(f"component {self.index}: intensity must be finite and >= 0")
        if not self.lo < self.hi:
            raise DomainError(f"component {self.index}: empty interval ({self.lo}, {self.hi}]")
        if math.isfinite(self.hi):
            object.__setattr__(self, "_table", _tabulate(self.marks, self.lo, self.hi))
        elif not isinstance(self.marks, ShiftedGpd) or self.marks.threshold != self.lo:
            raise DomainError(f"component {self.index}: unbounded interval needs GPD marks above {self.lo}")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self._table is not None:
            out = np.asarray(self._table.cdf(x), dtype=float)
        else:
            out = np.where(x <= self.lo, 0.0, np.asarray(self.marks.cdf(x), dtype=float))
        return out if out.ndim else float(out)

    def from_uniform(self, u) -> np.ndarray:
        """Inverse transform of uniforms on [0, 1) into integer death counts."""
        u = np.asarray(u, dtype=float)
        if self._table is not None:
            vals = np.asarray(self._table.values, dtype=float)
            idx = np.searchsorted(self._table._cum, u, side="right")
            return vals[np.minimum(idx, vals.size - 1)].astype(np.int64)
        gpd = self.marks.gpd
        y = np.asarray(gpd.ppf(u), dtype=float)
        # saturate rather than overflow for draws deep in the tail
        y = np.minimum(np.ceil(y), 2.0**62)
        return (self.lo + np.maximum(y, 1.0)).astype(np.int64)


@dataclass(frozen=True)
class CatEvent:
    time: float
    type: int
    deaths: int


@dataclass(frozen=True)
class EventBatch:
    """Events of many paths in flat arrays, sorted by (path, time)."""

    n_paths: int
    path: np.ndarray
    time: np.ndarray
    type: np.ndarray
    deaths: np.ndarray

    def counts_by_type(self, n_types: int) -> np.ndarray:
        """``(n_paths, n_types)`` array of event counts."""
        flat = self.path * n_types + self.type
        return np.bincount(flat, minlength=self.n_paths * n_types).reshape(self.n_paths, n_types)


@dataclass(frozen=True)
class CombinedCatModel:
    components: tuple[ComponentSpec, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DomainError("model needs at least one component")
        if comps[0].lo != 0:
            raise DomainError("first component must start at 0")
        for a, b in zip(comps[:-1], comps[1:]):
            if a.hi != b.lo:
                raise DomainError(f"intervals must be contiguous: {a.hi} != {b.lo}")
        if math.isfinite(comps[-1].hi):
            raise DomainError("last component must be unbounded above")
        object.__setattr__(self, "components", comps)

    @property
    def intensities(self) -> np.ndarray:
        return np.array([c.intensity for c in self.components])

    @property
    def total_intensity(self) -> float:
        return float(self.intensities.sum())

    @property
    def type_probs(self) -> np.ndarray:
        lam = self.total_intensity
        if lam == 0:
            return np.zeros(len(self.components))
        return self.intensities / lam

    def no_event_probability(self, horizon: float = 1.0) -> float:
        return math.exp(-self.total_intensity * horizon)

    def with_intensity(self, index: int, intensity: float) -> CombinedCatModel:
        comps = list(self.components)
        c = comps[index]
        comps[index] = ComponentSpec(c.index, c.lo, c.hi, intensity, c.marks)
        return CombinedCatModel(tuple(comps))


def small_event_intensity(no_event_prob: float, other_intensities: Sequence[float], horizon: float = 1.0) -> float:
    """Rate of the smallest component implied by a chosen one-year no-event probability.

    Solves ``exp(-lambda T) = q`` for the total rate and subtracts the rates
    of the remaining components.
    """
    if not 0 < no_event_prob < 1:
        raise DomainError("no-event probability must lie in (0, 1)")
    lam = -math.log(no_event_prob) / horizon - float(sum(other_intensities))
    if lam < 0:
        raise DomainError(f"no-event probability {no_event_prob} is too high for the other components")
    return lam


def default_model(
    small_intensity: float = 1.63,
    small_probs: Sequence[float] = (0.43, 0.32, 0.25),
    mid_intensity: float = 0.50,
    negbin: tuple[float, float] = (1.15, 0.182),
    big_intensity: float = 0.15,
    gpd: tuple[float, float] = (0.938, 12.9),
    u1: int = 3,
    u2: int = 20,
) -> CombinedCatModel:
    """Small events on ``{1, ..., u1}``, truncated negative binomial on ``(u1, u2]``, GPD above ``u2``."""
    if len(small_probs) != u1:
        raise DomainError(f"need {u1} probabilities for the small component")
    small = DiscreteDist(tuple(float(v) for v in range(1, u1 + 1)), tuple(small_probs))
    mid = Truncated(NegBinParams(*negbin), u1, u2)
    big = ShiftedGpd(u2, GpdParams(*gpd))
    return CombinedCatModel(
        (
            ComponentSpec(1, 0, u1, small_intensity, small),
            ComponentSpec(2, u1, u2, mid_intensity, mid),
            ComponentSpec(3, u2, math.inf, big_intensity, big),
        )
    )


def conditional_size_cdf(x, model: CombinedCatModel):
    """``sum_i p_i F_i(x)``: size law given that an event occurred."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for p, comp in zip(model.type_probs, model.components):
        if p > 0:
            out = out + p * np.asarray(comp.cdf(x), dtype=float)
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def unconditional_size_cdf(x, model: CombinedCatModel, horizon: float = 1.0):
    """``q + (1 - q) F(x)`` with ``q = exp(-lambda T)``; zero deaths when nothing happens."""
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    q = model.no_event_probability(horizon)
    out = q + (1.0 - q) * np.asarray(conditional_size_cdf(x, model), dtype=float)
    return out if out.ndim else float(out)


def _draw_sizes(model: CombinedCatModel, types: np.ndarray, u: np.ndarray) -> np.ndarray:
    deaths = np.empty(types.size, dtype=np.int64)
    for i, comp in enumerate(model.components):
        sel = types == i
        if sel.any():
            deaths[sel] = comp.from_uniform(u[sel])
    return deaths


def _event_times(rng: np.random.Generator, horizon: float, size) -> np.ndarray:
    # uniform on (0, T]
    return horizon * (1.0 - rng.random(size))


def sample_events(
    model: CombinedCatModel,
    horizon: float,
    rng: np.random.Generator,
    mode: str = "superposed",
) -> list[CatEvent]:
    """One path of events on ``(0, horizon]``, sorted by time.

    ``superposed`` draws the total count, uniform order-statistic times and
    then a type per event; ``separate`` runs each component on its own and
    merges. The two are equal in law.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if mode == "superposed":
        lam = model.total_intensity
        k = int(rng.poisson(lam * horizon)) if lam > 0 else 0
        if k == 0:
            return []
        times = np.sort(_event_times(rng, horizon, k))
        types = np.searchsorted(np.cumsum(model.type_probs)[:-1], rng.random(k), side="right")
        deaths = _draw_sizes(model, types, rng.random(k))
    elif mode == "separate":
        parts_t, parts_i, parts_n = [], [], []
        for i, comp in enumerate(model.components):
            k = int(rng.poisson(comp.intensity * horizon)) if comp.intensity > 0 else 0
            if k == 0:
                continue
            parts_t.append(_event_times(rng, horizon, k))
            parts_i.append(np.full(k, i))
            parts_n.append(comp.from_uniform(rng.random(k)))
        if not parts_t:
            return []
        times = np.concatenate(parts_t)
        order = np.argsort(times, kind="stable")
        times = times[order]
        types = np.concatenate(parts_i)[order]
        deaths = np.concatenate(parts_n)[order]
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    return [CatEvent(float(t), int(i) + 1, int(n)) for t, i, n in zip(times, types, deaths)]


def sample_event_batch(
    model: CombinedCatModel,
    horizon: float,
    rng: np.random.Generator,
    n_paths: int,
    mode: str = "superposed",
) -> EventBatch:
    """Vectorized counterpart of :func:`sample_events` over ``n_paths`` paths.

    Types in the returned batch are 0-based component positions.
    """
    if mode == "superposed":
        lam = model.total_intensity
        k = rng.poisson(lam * horizon, n_paths) if lam > 0 else np.zeros(n_paths, dtype=np.int64)
        total = int(k.sum())
        path = np.repeat(np.arange(n_paths), k)
        times = _event_times(rng, horizon, total)
        types = np.searchsorted(np.cumsum(model.type_probs)[:-1], rng.random(total), side="right")
        deaths = _draw_sizes(model, types, rng.random(total))
    elif mode == "separate":
        ps, ts, ys, ns = [], [], [], []
        for i, comp in enumerate(model.components):
            k = rng.poisson(comp.intensity * horizon, n_paths)
            tot = int(k.sum())
            ps.append(np.repeat(np.arange(n_paths), k))
            ts.append(_event_times(rng, horizon, tot))
            ys.append(np.full(tot, i))
            ns.append(comp.from_uniform(rng.random(tot)))
        path, times, types, deaths = (np.concatenate(a) for a in (ps, ts, ys, ns))
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    order = np.lexsort((times, path))
    return EventBatch(n_paths, path[order], times[order], types[order].astype(np.int64), deaths[order])
