"""Spectral pricing of realized-variance and volatility derivatives on
regime-switching lattice models."""

from ._volspec import (
    ConfigError,
    DomainError,
    Engine,
    Error,
    LeakageError,
    ModelConfig,
    NumericalError,
    black_scholes,
    forward_implied_vol,
    forward_start_prices,
    greeks,
    implied_vol,
    log_contract,
    simulate_realized_variance,
    vanilla_price,
    variance_distribution,
    vix_pdf,
    vix_portfolio,
)


def vol_terms(variance):
    """Quote a variance in volatility points: 100 * sqrt(variance)."""
    return 100.0 * max(variance, 0.0) ** 0.5


def load_engine(path):
    """Build an engine from a JSON model file."""
    return Engine(ModelConfig.load(str(path)))


__all__ = [
    "ConfigError",
    "DomainError",
    "Engine",
    "Error",
    "LeakageError",
    "ModelConfig",
    "NumericalError",
    "black_scholes",
    "forward_implied_vol",
    "forward_start_prices",
    "greeks",
    "implied_vol",
    "load_engine",
    "log_contract",
    "simulate_realized_variance",
    "vanilla_price",
    "variance_distribution",
    "vix_pdf",
    "vix_portfolio",
    "vol_terms",
]
