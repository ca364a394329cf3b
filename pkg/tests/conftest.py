import datetime as dt

import numpy as np
import pytest
from hypothesis import settings

from lifecat.portfolio import Portfolio, PortfolioSpec, generate_portfolio

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_book() -> Portfolio:
    spec = PortfolioSpec(count=5_000, start_date=dt.date(2025, 1, 1))
    return generate_portfolio(spec, np.random.default_rng(11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- desk-scale pricing runs shared by the acceptance suite ---------------------------

PRICING_PATHS = 100_000


class CheckedContract:
    """Wraps a contract and audits every recovery against the raw claims.

    Only usable in-process (``workers=1``): the counters live on the instance.
    """

    def __init__(self, inner):
        self.inner = inner
        self.limit = inner.limit
        self.violations = 0
        self.max_recovered = 0

    def recover(self, path):
        r = self.inner.recover(path)
        totals = np.array([int(e.claims.sum()) for e in path.events], dtype=np.int64)
        gross = int(totals.sum())
        ok = (
            all(int(e.claims.sum()) == e.total for e in path.events)
            and gross == path.total
            and np.all(r.per_event >= 0)
            and np.all(r.per_event <= totals)
            and r.recovered + r.retained == gross
        )
        self.violations += not ok
        self.max_recovered = max(self.max_recovered, r.recovered)
        return r


@pytest.fixture(scope="session")
def desk_book():
    from lifecat.config import RunConfig

    cfg = RunConfig()
    return cfg, cfg.portfolio.build(cfg.run.seed, cfg.run.start_date)


@pytest.fixture(scope="session")
def pricing_runs(desk_book):
    """Beta- and fixed-proportion runs of the default book and contracts at 10^5 paths."""
    from lifecat.simengine import run_simulations

    cfg, book = desk_book
    out = {}
    for mode in ("beta", "fixed"):
        c = cfg.model_copy(update={"proportions": cfg.proportions.model_copy(update={"mode": mode})})
        contracts = {k: CheckedContract(v) for k, v in c.build_contracts().items()}
        res = run_simulations(
            c.model.build(), book, c.proportions.build(), PRICING_PATHS, c.run.seed, 1, c.sim_options(), contracts
        )
        out[mode] = (res, contracts)
    return out


# -- one PASS/FAIL line per acceptance criterion --------------------------------------

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def record_criterion(request):
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
