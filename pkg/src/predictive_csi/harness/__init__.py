"""Experiment harness: configuration, sweeps, CSV output and the CLI."""

from .config import PRESETS, ExperimentConfig, load_config, parse_config_text, preset
from .sweep import ResultRow, ResultTable, emit_csv, run_sweep

__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "load_config",
    "parse_config_text",
    "preset",
    "ResultRow",
    "ResultTable",
    "emit_csv",
    "run_sweep",
]
