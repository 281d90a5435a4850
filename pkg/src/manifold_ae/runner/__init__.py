"""Experiment orchestration and the command-line interface."""

from .config import ConfigError, ExperimentConfig, parse_config
from .experiments import (
    cmd_analyze,
    cmd_oracle,
    cmd_reproduce_circles,
    cmd_sample,
    cmd_sweep,
    cmd_train,
)

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "cmd_analyze", "cmd_oracle",
           "cmd_reproduce_circles", "cmd_sample", "cmd_sweep", "cmd_train"]
