"""Temporal point processes with sum-of-basis neural intensities."""

from ._core import (
    ConfigError,
    DomainError,
    Error,
    PreconditionError,
    Process,
    ValidationError,
    basis_eval,
    fit_mle,
    ks_test_exp1,
    paired_ttest,
    process,
    run_cli,
    simulate,
    transfer_eval,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "Error",
    "PreconditionError",
    "Process",
    "ValidationError",
    "basis_eval",
    "fit_mle",
    "ks_test_exp1",
    "paired_ttest",
    "process",
    "run_cli",
    "simulate",
    "transfer_eval",
]
