"""Experiment registry, configuration, reports and command-line entry point."""
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import EXPERIMENTS, run_experiment
from .report import Check, Report, emit_report, recompute_checks

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "EXPERIMENTS",
    "run_experiment",
    "Check",
    "Report",
    "emit_report",
    "recompute_checks",
]
