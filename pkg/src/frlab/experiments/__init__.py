"""Config-driven simulation sweeps, presets and artifact output."""

from __future__ import annotations

from .config import ExperimentConfig, load_config, parse_config
from .presets import build_model, preset
from .sweep import SweepResult, SweepRow, evaluate_risk, run_sweep

__all__ = [
    "ExperimentConfig",
    "SweepResult",
    "SweepRow",
    "build_model",
    "evaluate_risk",
    "load_config",
    "parse_config",
    "preset",
    "run_sweep",
]
