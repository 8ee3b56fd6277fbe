"""Experiment orchestration: JSON configs, multi-seed runs, reports and the CLI."""

from .config import ExperimentConfig, config_from_dict, load_config, parse_seed_list
from .runner import SeedFailure, build_report, run_experiment, run_seeds, summarize

__all__ = [
    "ExperimentConfig",
    "SeedFailure",
    "build_report",
    "config_from_dict",
    "load_config",
    "parse_seed_list",
    "run_experiment",
    "run_seeds",
    "summarize",
]
