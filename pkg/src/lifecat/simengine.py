"""Policy-level Monte Carlo of catastrophe deaths hitting an insurance book.

Per path: draw the events, split each death count into insured and then
covered victims, pick that many living insureds at random, and pay the risk
sums of their in-force policies. Every path draws from its own three RNG
streams (events, proportions, victims) derived from ``(seed, path index)``,
so results do not depend on how paths are spread over workers.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .catmodel import CatEvent, CombinedCatModel, sample_events
from .distributions import BetaParams, DomainError
from .portfolio import Portfolio, _day

__all__ = [
    "ProportionSpec",
    "PopulationState",
    "SimOptions",
    "EventRecord",
    "PathResult",
    "PathContext",
    "SimulationResult",
    "path_streams",
    "round_half_up",
    "apply_population_accounting",
    "draw_victims",
    "simulate_path",
    "run_simulations",
    "write_event_log",
]

DAYS_PER_YEAR = 365.25
# above this many victims the draw switches from rejection to an explicit living set
DENSE_DRAW = 2_000


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class ProportionSpec:
    """Insured share ``P^I`` and covered share ``P^C`` of an event's victims.

    ``beta`` mode draws both from beta laws; ``fixed`` mode uses their means
    (or ``fixed_insured`` / ``fixed_covered`` when given).
    """

    mode: str = "beta"
    insured: BetaParams = BetaParams(2.0, 3.0)
    covered: BetaParams = BetaParams(0.5, 2.0)
    fixed_insured: float | None = None
    fixed_covered: float | None = None

    def __post_init__(self):
        if self.mode not in ("beta", "fixed"):
            raise DomainError(f"unknown proportion mode {self.mode!r}")
        for v in (self.fixed_insured, self.fixed_covered):
            if v is not None and not 0 <= v <= 1:
                raise DomainError("fixed proportions must lie in [0, 1]")

    @property
    def means(self) -> tuple[float, float]:
        mi = self.fixed_insured if self.mode == "fixed" and self.fixed_insured is not None else self.insured.mean
        mc = self.fixed_covered if self.mode == "fixed" and self.fixed_covered is not None else self.covered.mean
        return mi, mc

    def draw(self, rng: np.random.Generator, mean_insured: float | None = None, mean_covered: float | None = None) -> tuple[float, float]:
        """One ``(P^I, P^C)`` pair; optional means override those of the spec.

        In beta mode a moved mean keeps the concentration ``alpha + beta``.
        """
        mi, mc = self.means
        mi = mi if mean_insured is None else mean_insured
        mc = mc if mean_covered is None else mean_covered
        if self.mode == "fixed":
            return mi, mc
        return (
            _beta_draw(rng, self.insured, mi, mean_insured is not None),
            _beta_draw(rng, self.covered, mc, mean_covered is not None),
        )


def _beta_draw(rng: np.random.Generator, base: BetaParams, mean: float, moved: bool) -> float:
    # always consume one variate so stream alignment does not depend on the mean
    if not moved:
        return float(rng.beta(base.alpha, base.beta))
    if mean <= 0 or mean >= 1:
        rng.random()
        return float(min(max(mean, 0.0), 1.0))
    b = BetaParams.from_mean(mean, base.alpha + base.beta)
    return float(rng.beta(b.alpha, b.beta))


@dataclass(frozen=True)
class PopulationState:
    """Total, insured and company-covered population just before an event."""

    population: int
    insured: int
    covered: int
    mean_insured: float
    mean_covered: float

    def __post_init__(self):
        if not 0 <= self.covered <= self.insured <= self.population:
            raise DomainError("need 0 <= covered <= insured <= population")
        if not (0 <= self.mean_insured <= 1 and 0 <= self.mean_covered <= 1):
            raise DomainError("population shares must lie in [0, 1]")

    @classmethod
    def initial(cls, population: int, mean_insured: float, mean_covered: float) -> PopulationState:
        insured = round_half_up(population * mean_insured)
        return cls(population, insured, round_half_up(insured * mean_covered), mean_insured, mean_covered)


def apply_population_accounting(
    deaths: int, state: PopulationState, p_insured: float, p_covered: float
) -> tuple[int, int, PopulationState]:
    """Insured and covered victims clamped to what the populations allow.

    ``N^I = min(N^ip, max(P^I N, N^ip - max(N^pop - N, 0)))`` and likewise for
    ``N^C`` against the covered population; the raw products are rounded
    half up first. Afterwards the populations shrink by the victims (floored
    at zero) and the shares seen by the next event are recomputed.
    """
    if deaths <= 0:
        return 0, 0, state
    pop, ip, cov = state.population, state.insured, state.covered
    n_i = min(ip, max(round_half_up(p_insured * deaths), ip - max(pop - deaths, 0)))
    n_c = min(cov, max(round_half_up(p_covered * n_i), cov - max(ip - n_i, 0)))
    pop2, ip2, cov2 = max(pop - deaths, 0), max(ip - n_i, 0), max(cov - n_c, 0)
    mi = ip2 / pop2 if pop2 > 0 else 0.0
    mc = cov2 / ip2 if ip2 > 0 else 0.0
    return n_i, n_c, PopulationState(pop2, ip2, cov2, mi, mc)


@dataclass(frozen=True)
class SimOptions:
    """Run settings shared by all paths.

    ``event_hook`` is called with a :class:`PathContext` before each event
    is processed; it may add insureds to ``ctx.dead`` (for example to model
    background mortality) but must draw randomness only from ``ctx.rng``.
    """

    horizon: float = 1.0
    sampling_mode: str = "superposed"
    population_accounting: bool = False
    population: int = 5_000_000
    start_date: dt.date = dt.date(2025, 1, 1)
    keep_claims: bool = True
    event_hook: Callable[[PathContext], None] | None = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if self.population < 0:
            raise DomainError("population must be >= 0")


@dataclass(frozen=True)
class EventRecord:
    time: float
    type: int
    deaths: int
    p_insured: float
    p_covered: float
    n_insured: int
    n_covered: int
    victims: np.ndarray
    policies: np.ndarray
    claims: np.ndarray
    total: int

    @property
    def total_eur(self) -> float:
        return self.total / 100.0


@dataclass(frozen=True)
class PathResult:
    index: int
    events: tuple[EventRecord, ...]

    @property
    def total(self) -> int:
        """Path total ``C(T)`` in cents."""
        return sum(e.total for e in self.events)

    @property
    def total_eur(self) -> float:
        return self.total / 100.0


@dataclass
class PathContext:
    index: int
    event: CatEvent
    dead: set
    rng: np.random.Generator
    state: PopulationState | None


@dataclass(frozen=True)
class PathStreams:
    events: np.random.Generator
    proportions: np.random.Generator
    victims: np.random.Generator


def path_streams(seed: int, index: int) -> PathStreams:
    """Independent streams for path ``index``, a pure function of ``(seed, index)``."""
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return PathStreams(*(np.random.default_rng(s) for s in ss.spawn(3)))


def draw_victims(rng: np.random.Generator, n_insureds: int, dead: set, k: int) -> np.ndarray:
    """``min(k, living)`` distinct living insureds, uniformly without replacement."""
    living = n_insureds - len(dead)
    k = min(k, living)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k == living:
        alive = np.ones(n_insureds, dtype=bool)
        if dead:
            alive[np.fromiter(dead, dtype=np.int64, count=len(dead))] = False
        return np.flatnonzero(alive)
    if k > DENSE_DRAW or len(dead) > n_insureds // 2:
        alive = np.ones(n_insureds, dtype=bool)
        if dead:
            alive[np.fromiter(dead, dtype=np.int64, count=len(dead))] = False
        return rng.choice(np.flatnonzero(alive), size=k, replace=False)
    chosen: dict[int, None] = {}
    while len(chosen) < k:
        for c in rng.integers(0, n_insureds, size=k - len(chosen)).tolist():
            if c not in dead and c not in chosen:
                chosen[c] = None
                if len(chosen) == k:
                    break
    return np.fromiter(chosen, dtype=np.int64, count=k)


_EMPTY = np.empty(0, dtype=np.int64)


def simulate_path(
    model: CombinedCatModel,
    portfolio: Portfolio,
    proportions: ProportionSpec,
    rng: PathStreams | np.random.Generator,
    options: SimOptions = SimOptions(),
    index: int = 0,
    events: Sequence[CatEvent] | None = None,
) -> PathResult:
    """Simulate one path.

    Args:
        rng: Per-path streams, or a single generator used for all draws.
        events: Optional fixed event list, bypassing event sampling.
    """
    if isinstance(rng, np.random.Generator):
        rng = PathStreams(rng, rng, rng)
    if events is None:
        events = sample_events(model, options.horizon, rng.events, options.sampling_mode)
    if not events:
        return PathResult(index, ())
    dead: set[int] = set()
    state = None
    if options.population_accounting:
        mi, mc = proportions.means
        state = PopulationState.initial(options.population, mi, mc)
    start_day = _day(options.start_date)
    records = []
    for ev in events:
        if options.event_hook is not None:
            options.event_hook(PathContext(index, ev, dead, rng.victims, state))
        if state is None:
            p_i, p_c = proportions.draw(rng.proportions)
            n_i = round_half_up(p_i * ev.deaths)
            n_c = round_half_up(p_c * n_i)
        else:
            p_i, p_c = proportions.draw(rng.proportions, state.mean_insured, state.mean_covered)
            n_i, n_c, state = apply_population_accounting(ev.deaths, state, p_i, p_c)
        victims = draw_victims(rng.victims, portfolio.n_insureds, dead, n_c) if n_c > 0 else _EMPTY
        if victims.size:
            dead.update(victims.tolist())
            pol = portfolio.policies_of(victims)
            pol = pol[portfolio.in_force(pol, start_day + ev.time * DAYS_PER_YEAR)]
            claims = portfolio.risk_sum_cents[pol]
            total = int(claims.sum())
        else:
            pol, claims, total = _EMPTY, _EMPTY, 0
        if not options.keep_claims:
            victims, pol, claims = _EMPTY, _EMPTY, _EMPTY
        records.append(EventRecord(ev.time, ev.type, ev.deaths, p_i, p_c, n_i, n_c, victims, pol, claims, total))
    return PathResult(index, tuple(records))


# --------------------------------------------------------------------------
# batch runs
# --------------------------------------------------------------------------


@dataclass
class SimulationResult:
    """Per-path gross totals and contract recoveries, in cents, ordered by path index."""

    seed: int
    gross: np.ndarray
    recovered: dict[str, np.ndarray]
    n_events: np.ndarray
    paths: list[PathResult] | None = None

    @property
    def n_paths(self) -> int:
        return int(self.gross.size)

    def after(self, contract: str) -> np.ndarray:
        return self.gross - self.recovered[contract]


@dataclass(frozen=True)
class _Job:
    model: CombinedCatModel
    portfolio: Portfolio
    proportions: ProportionSpec
    options: SimOptions
    contracts: Mapping[str, object]
    seed: int
    keep_paths: bool


_JOB: _Job | None = None


def _init_worker(job: _Job) -> None:
    global _JOB
    _JOB = job


def _run_chunk(bounds: tuple[int, int], job: _Job | None = None):
    job = job or _JOB
    lo, hi = bounds
    n = hi - lo
    gross = np.zeros(n, dtype=np.int64)
    n_events = np.zeros(n, dtype=np.int64)
    rec = {name: np.zeros(n, dtype=np.int64) for name in job.contracts}
    paths = [] if job.keep_paths else None
    for k, idx in enumerate(range(lo, hi)):
        res = simulate_path(job.model, job.portfolio, job.proportions, path_streams(job.seed, idx), job.options, idx)
        gross[k] = res.total
        n_events[k] = len(res.events)
        for name, contract in job.contracts.items():
            rec[name][k] = contract.recover(res).recovered
        if paths is not None:
            paths.append(res)
    return gross, rec, n_events, paths


def run_simulations(
    model: CombinedCatModel,
    portfolio: Portfolio,
    proportions: ProportionSpec,
    n_sim: int,
    seed: int,
    workers: int = 1,
    options: SimOptions = SimOptions(),
    contracts: Mapping[str, object] | None = None,
    keep_paths: bool = False,
) -> SimulationResult:
    """Simulate ``n_sim`` independent paths.

    ``contracts`` maps names to objects with a ``recover(PathResult)``
    method; they are applied inside the workers so per-claim detail never
    leaves them. Output is bit-identical for a given seed whatever the
    worker count.
    """
    if n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    contracts = dict(contracts or {})
    if keep_paths is False and not contracts:
        options = replace(options, keep_claims=False)
    job = _Job(model, portfolio, proportions, options, contracts, int(seed), keep_paths)
    if workers == 1 or n_sim < 2:
        parts = [_run_chunk((0, n_sim), job)]
    else:
        n_chunks = min(n_sim, workers * 4)
        edges = np.linspace(0, n_sim, n_chunks + 1).astype(int)
        bounds = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(job,)) as ex:
            parts = list(ex.map(_run_chunk, bounds))
    gross = np.concatenate([p[0] for p in parts])
    rec = {name: np.concatenate([p[1][name] for p in parts]) for name in contracts}
    n_events = np.concatenate([p[2] for p in parts])
    paths = [r for p in parts for r in p[3]] if keep_paths else None
    return SimulationResult(int(seed), gross, rec, n_events, paths)


EVENT_LOG_HEADER = (
    "path",
    "event_time",
    "type",
    "n_deaths",
    "p_insured",
    "p_covered",
    "n_insured",
    "n_covered",
    "event_claims",
)


def write_event_log(paths: Iterable[PathResult], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_LOG_HEADER)
        for res in paths:
            for e in res.events:
                w.writerow(
                    (
                        res.index,
                        repr(e.time),
                        e.type,
                        e.deaths,
                        repr(e.p_insured),
                        repr(e.p_covered),
                        e.n_insured,
                        e.n_covered,
                        f"{e.total // 100}.{e.total % 100:02d}",
                    )
                )
    return path

