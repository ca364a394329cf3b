"""Run configuration: a single JSON document with sections ``model``,
``proportions``, ``portfolio``, ``contracts`` and ``run``.

Monetary amounts in the document are EUR; they are converted to cents
when the contract objects are built.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import math
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, model_validator

from .catmodel import CombinedCatModel, default_model, small_event_intensity
from .distributions import BetaParams
from .portfolio import Portfolio, PortfolioSpec, eur_to_cents, generate_portfolio, read_portfolio_csv
from .reinsurance import PerOccXL, PerRiskXL, StopLoss
from .simengine import ProportionSpec, SimOptions

__all__ = [
    "ModelConfig",
    "ProportionsConfig",
    "PortfolioConfig",
    "PerRiskConfig",
    "PerOccurrenceConfig",
    "StopLossConfig",
    "RunSettings",
    "RunConfig",
    "load_config",
    "config_hash",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelConfig(_Strict):
    u1: int = Field(3, ge=1)
    u2: int = Field(20, ge=2)
    small_intensity: NonNegativeFloat = 1.63
    no_event_probability: float | None = Field(None, gt=0, lt=1)
    small_probs: list[NonNegativeFloat] = [0.43, 0.32, 0.25]
    mid_intensity: NonNegativeFloat = 0.50
    negbin_r: PositiveFloat = 1.15
    negbin_p: float = Field(0.182, gt=0, lt=1)
    big_intensity: NonNegativeFloat = 0.15
    xi: float = 0.938
    beta: PositiveFloat = 12.9
    sampling_mode: Literal["superposed", "separate"] = "superposed"

    @model_validator(mode="after")
    def _check(self):
        if self.u2 <= self.u1:
            raise ValueError("u2 must exceed u1")
        if len(self.small_probs) != self.u1:
            raise ValueError(f"small_probs needs {self.u1} entries (one per count 1..u1)")
        if not math.isclose(sum(self.small_probs), 1.0, abs_tol=1e-9):
            raise ValueError("small_probs must sum to 1")
        return self

    def build(self) -> CombinedCatModel:
        lam1 = self.small_intensity
        if self.no_event_probability is not None:
            lam1 = small_event_intensity(self.no_event_probability, [self.mid_intensity, self.big_intensity])
        return default_model(
            lam1,
            tuple(self.small_probs),
            self.mid_intensity,
            (self.negbin_r, self.negbin_p),
            self.big_intensity,
            (self.xi, self.beta),
            self.u1,
            self.u2,
        )


class BetaConfig(_Strict):
    alpha: PositiveFloat
    beta: PositiveFloat


class ProportionsConfig(_Strict):
    mode: Literal["beta", "fixed"] = "beta"
    insured: BetaConfig = BetaConfig(alpha=2.0, beta=3.0)
    covered: BetaConfig = BetaConfig(alpha=0.5, beta=2.0)
    fixed_insured: float | None = Field(None, ge=0, le=1)
    fixed_covered: float | None = Field(None, ge=0, le=1)
    population_accounting: bool = False
    population: int = Field(5_000_000, ge=0)

    def build(self) -> ProportionSpec:
        return ProportionSpec(
            self.mode,
            BetaParams(self.insured.alpha, self.insured.beta),
            BetaParams(self.covered.alpha, self.covered.beta),
            self.fixed_insured,
            self.fixed_covered,
        )


class GeneratorConfig(_Strict):
    count: int = Field(400_000, ge=0)
    min_sum: PositiveFloat = 5_000
    max_sum: PositiveFloat = 10_000_000
    atoms: dict[str, NonNegativeFloat] | None = None
    atom_share: float = Field(0.30, ge=0, le=1)
    body_median: PositiveFloat = 42_000
    body_sigma: NonNegativeFloat = 0.65
    tail_share: float = Field(0.025, ge=0, le=1)
    tail_start: PositiveFloat = 200_000
    tail_alpha: PositiveFloat = 2.0
    rounding: PositiveFloat = 50

    def spec(self, start_date: dt.date) -> PortfolioSpec:
        kw = self.model_dump(exclude={"atoms"})
        if self.atoms is not None:
            kw["atoms"] = {float(k): v for k, v in self.atoms.items()}
        return PortfolioSpec(start_date=start_date, **kw)


class PortfolioConfig(_Strict):
    file: str | None = None
    generator: GeneratorConfig = GeneratorConfig()
    seed: int | None = None

    def build(self, run_seed: int, start_date: dt.date, base_dir: Path | None = None) -> Portfolio:
        if self.file is not None:
            p = Path(self.file)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            return read_portfolio_csv(p)
        seed = self.seed if self.seed is not None else run_seed
        # the book gets its own stream so it never overlaps the path streams
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**32 - 1,)))
        return generate_portfolio(self.generator.spec(start_date), rng)


class PerRiskConfig(_Strict):
    type: Literal["per_risk"]
    name: str = "per_risk"
    retention: NonNegativeFloat
    limit: NonNegativeFloat
    aal: NonNegativeFloat | None = None
    aad: NonNegativeFloat = 0
    aggregate_order: Literal["aad_first", "aal_first"] = "aad_first"

    def build(self) -> PerRiskXL:
        return PerRiskXL(
            eur_to_cents(self.retention),
            eur_to_cents(self.limit),
            None if self.aal is None else eur_to_cents(self.aal),
            eur_to_cents(self.aad),
            self.aggregate_order == "aad_first",
        )


class PerOccurrenceConfig(_Strict):
    type: Literal["per_occurrence"]
    name: str = "per_occurrence"
    retention: NonNegativeFloat
    limit: NonNegativeFloat
    reinstatements: int = Field(0, ge=0)
    aal: NonNegativeFloat | None = None
    min_deaths: int = Field(0, ge=0)

    def build(self) -> PerOccXL:
        return PerOccXL(
            eur_to_cents(self.retention),
            eur_to_cents(self.limit),
            self.reinstatements,
            None if self.aal is None else eur_to_cents(self.aal),
            self.min_deaths,
        )


class StopLossConfig(_Strict):
    type: Literal["stop_loss"]
    name: str = "stop_loss"
    retention: NonNegativeFloat
    limit: NonNegativeFloat

    def build(self) -> StopLoss:
        return StopLoss(eur_to_cents(self.retention), eur_to_cents(self.limit))


ContractConfig = Annotated[
    Union[PerRiskConfig, PerOccurrenceConfig, StopLossConfig], Field(discriminator="type")
]


def _default_contracts() -> list:
    return [
        PerRiskConfig(type="per_risk", retention=100_000, limit=10_000_000, aal=80_000_000, aad=1_000_000),
        PerOccurrenceConfig(type="per_occurrence", retention=500_000, limit=50_000_000, reinstatements=1, aal=150_000_000),
        StopLossConfig(type="stop_loss", retention=20_000_000, limit=500_000_000),
    ]


class RunSettings(_Strict):
    horizon: PositiveFloat = 1.0
    n_sim: int = Field(100_000, ge=1)
    seed: int = Field(20240601, ge=0)
    workers: int = Field(1, ge=1)
    start_date: dt.date = dt.date(2025, 1, 1)


class RunConfig(_Strict):
    model: ModelConfig = ModelConfig()
    proportions: ProportionsConfig = ProportionsConfig()
    portfolio: PortfolioConfig = PortfolioConfig()
    contracts: list[ContractConfig] = Field(default_factory=_default_contracts)
    run: RunSettings = RunSettings()

    @model_validator(mode="after")
    def _unique_names(self):
        names = [c.name for c in self.contracts]
        if len(set(names)) != len(names):
            raise ValueError(f"contract names must be unique, got {names}")
        return self

    def sim_options(self) -> SimOptions:
        return SimOptions(
            horizon=self.run.horizon,
            sampling_mode=self.model.sampling_mode,
            population_accounting=self.proportions.population_accounting,
            population=self.proportions.population,
            start_date=self.run.start_date,
        )

    def build_contracts(self) -> dict[str, object]:
        return {c.name: c.build() for c in self.contracts}


def load_config(path: str | Path | None) -> RunConfig:
    """Read and validate a JSON config; ``None`` gives the defaults.

    Raises:
        pydantic.ValidationError: with field-level messages.
        ValueError: if the file is not valid JSON.
    """
    if path is None:
        return RunConfig()
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    return RunConfig.model_validate(data)


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of the validated config."""
    canon = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
