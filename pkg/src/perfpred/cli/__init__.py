"""Config-driven experiment harness: flat key=value configs, trajectory and
aggregate CSV serialization, sweep/check orchestration, and the ``perfpred``
command-line entry point."""

from .config import ConfigError, ExperimentConfig, parse_config, parse_config_text

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "parse_config_text"]
