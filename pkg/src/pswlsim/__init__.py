"""Deterministic simulator for NAND SSD arrays under RAID scaling, with
probability-sensitive wear leveling and comparison policies."""

__version__ = "0.1.0"

from .config import ExperimentConfig, config_from_dict, load_config
from .simkernel import ExperimentReport, SimKernel, run_experiment

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "SimKernel",
    "config_from_dict",
    "load_config",
    "run_experiment",
    "__version__",
]
