"""Absorption-coefficient inference for the heat equation (C++ core)."""

from ._core import (
    HeatinvError,
    __version__,
    checks,
    default_config,
    estimate_point,
    lower_bound,
    normalize_config,
    rate_study,
    run_chain,
    run_cli,
    sample_prior,
    simulate,
    solve_forward,
)

__all__ = [
    "HeatinvError",
    "__version__",
    "checks",
    "default_config",
    "estimate_point",
    "lower_bound",
    "normalize_config",
    "rate_study",
    "run_chain",
    "run_cli",
    "sample_prior",
    "simulate",
    "solve_forward",
]
