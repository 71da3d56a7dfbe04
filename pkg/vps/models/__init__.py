"""
Models package for vps.

Schema definitions for experiment configuration files.
"""

from .config import (
    AnsatzConfig,
    BenchConfig,
    ExperimentConfig,
    HamiltonianConfig,
    ObjectiveConfig,
    ThermalConfig,
    load_config,
)

__all__ = [
    "AnsatzConfig",
    "BenchConfig",
    "ExperimentConfig",
    "HamiltonianConfig",
    "ObjectiveConfig",
    "ThermalConfig",
    "load_config",
]
