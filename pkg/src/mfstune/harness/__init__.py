"""Configuration, ledger persistence and the command-line front end."""

from .commands import cmd_compare, cmd_forward, cmd_oracle_check, cmd_report, cmd_tune
from .config import ExperimentConfig, load_config, preset

__all__ = ["ExperimentConfig", "load_config", "preset", "cmd_forward", "cmd_oracle_check", "cmd_tune",
           "cmd_compare", "cmd_report"]
