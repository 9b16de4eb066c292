"""Polynomial bandit experiments: Python access to the C++ harness."""

from ._polybandit import (
    AlgorithmError,
    ConfigError,
    __version__,
    fit_loglog_slope,
    hardcase,
    report,
    run,
    sweep,
    tensorize,
    validate_config,
)

__all__ = [
    "AlgorithmError",
    "ConfigError",
    "__version__",
    "fit_loglog_slope",
    "hardcase",
    "report",
    "run",
    "sweep",
    "tensorize",
    "validate_config",
]
