"""BER campaigns, configuration and the command-line interface."""

from .config import ConfigError, SimConfig, load_config

__all__ = ["ConfigError", "SimConfig", "load_config"]
