"""Configuration, presets, persistence and reporting for reproducible runs."""

from .checkpoint import (Checkpoint, CheckpointError, CheckpointVersionError, CorruptCheckpointError,
                         GeometryMismatchError, load_checkpoint, save_checkpoint)
from .config import ConfigError, SimulationConfig, apply_overrides, load_config, parse_config
from .presets import list_presets, preset_config
from .report import RunReport, emit_report, load_report
from .scenario import run_scenario, verify_run

__all__ = [
    "Checkpoint", "CheckpointError", "CheckpointVersionError", "CorruptCheckpointError", "GeometryMismatchError",
    "ConfigError", "RunReport", "SimulationConfig", "apply_overrides", "emit_report", "list_presets",
    "load_checkpoint", "load_config", "load_report", "parse_config", "preset_config", "run_scenario",
    "save_checkpoint", "verify_run",
]
