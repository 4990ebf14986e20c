"""Python access to the metabandit core plus numpy readers for its artifacts."""

from ._core import (
    ConfigError,
    ContractError,
    DomainError,
    FormatError,
    TrainingError,
    expected_return,
    forward,
    init_params,
    load_checkpoint,
    optimal_exploration,
    param_count,
    participation_ratio,
    pca,
    phase_diagram,
    save_checkpoint,
    simulate_policy,
)
from . import formats, reference

__all__ = [
    "ConfigError",
    "ContractError",
    "DomainError",
    "FormatError",
    "TrainingError",
    "expected_return",
    "forward",
    "formats",
    "init_params",
    "load_checkpoint",
    "optimal_exploration",
    "param_count",
    "participation_ratio",
    "pca",
    "phase_diagram",
    "reference",
    "save_checkpoint",
    "simulate_policy",
]
