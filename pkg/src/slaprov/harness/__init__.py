"""Experiment configs, sweep runner and command line interface."""

from .config import ConfigError, ExperimentConfig, PolicySpec, Sweep, load
from .runner import (
    csv_columns,
    emit_plot_data,
    emit_wait_pdfs,
    run_experiment,
    run_seed,
    series,
    sweep_status,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PolicySpec",
    "Sweep",
    "load",
    "csv_columns",
    "emit_plot_data",
    "emit_wait_pdfs",
    "run_experiment",
    "run_seed",
    "series",
    "sweep_status",
]
