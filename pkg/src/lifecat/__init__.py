"""Catastrophe death-count models, tail risk measures and policy-level
reinsurance pricing by Monte Carlo."""

from .catalog import EventCatalog, read_catalog
from .catmodel import CombinedCatModel, default_model, sample_events
from .distributions import DomainError, GpdParams
from .fitting import ExcessSample, fit_gpd, fit_poisson_intensity
from .pointprocess import PotData, fit_pot, lr_test
from .portfolio import Portfolio, PortfolioSpec, generate_portfolio
from .reinsurance import PerOccXL, PerRiskXL, StopLoss, price_summary
from .riskmeasures import TailModel, es, return_level, var
from .simengine import ProportionSpec, SimOptions, run_simulations, simulate_path

__version__ = "0.1.0"

__all__ = [
    "EventCatalog",
    "read_catalog",
    "CombinedCatModel",
    "default_model",
    "sample_events",
    "DomainError",
    "GpdParams",
    "ExcessSample",
    "fit_gpd",
    "fit_poisson_intensity",
    "PotData",
    "fit_pot",
    "lr_test",
    "Portfolio",
    "PortfolioSpec",
    "generate_portfolio",
    "PerOccXL",
    "PerRiskXL",
    "StopLoss",
    "price_summary",
    "TailModel",
    "es",
    "return_level",
    "var",
    "ProportionSpec",
    "SimOptions",
    "run_simulations",
    "simulate_path",
    "__version__",
]
