"""
Configuration: application settings (YAML + environment) and the JSON run
configuration.

Only the settings are imported here; every module's logger reads them at
import time. Run configs: ``from fimguard.config.run_config import RunConfig``.
"""

from .settings import Settings, settings

__all__ = ["Settings", "settings"]
