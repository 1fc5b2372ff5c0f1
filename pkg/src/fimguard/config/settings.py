"""
Configuration Management - Building Block: Settings

Application-level settings: where the MNIST files and results live, how
many worker threads attack/eval may use, and how to log. Values come from
config/config.yaml; FIMGUARD_* environment variables (also read from .env)
take precedence. Run-specific parameters (data split, training regime,
attacks) live in the JSON run config instead (config/run_config.py).

Environment:
    - FIMGUARD_CONFIG: explicit path to the YAML file
    - FIMGUARD_DATA_DIR, FIMGUARD_OUTPUT_DIR, FIMGUARD_THREADS
    - FIMGUARD_LOG_LEVEL, FIMGUARD_LOG_FORMAT, FIMGUARD_LOG_FILE

See config/config.yaml for the full configuration reference and
.env.example for the environment template.
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

load_dotenv()

_CANDIDATES = (
    Path("config/config.yaml"),
    Path(__file__).resolve().parents[3] / "config" / "config.yaml",
)


def _find_config() -> Optional[str]:
    explicit = os.getenv("FIMGUARD_CONFIG")
    if explicit:
        return explicit
    found = next((path for path in _CANDIDATES if path.exists()), None)
    return str(found) if found else None


class Settings:
    """
    Typed view over config.yaml with environment overrides.

    Usage:
        >>> from fimguard.config.settings import settings
        >>> settings.data_dir
        'data/mnist'
        >>> settings.threads
        1
    """

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path or _find_config()
        self.config_data: Dict[str, Any] = {}
        if self.config_path and Path(self.config_path).exists():
            with open(self.config_path, "r", encoding="utf-8") as f:
                self.config_data = yaml.safe_load(f) or {}

    def _get(self, section: str, key: str, default: Any, env: Optional[str] = None) -> Any:
        if env and os.getenv(env) is not None:
            return os.getenv(env)
        return (self.config_data.get(section) or {}).get(key, default)

    @property
    def data_dir(self) -> str:
        return self._get("paths", "data_dir", "data/mnist", "FIMGUARD_DATA_DIR")

    @property
    def output_dir(self) -> str:
        return self._get("paths", "output_dir", "results", "FIMGUARD_OUTPUT_DIR")

    @property
    def experiments_dir(self) -> str:
        return self._get("paths", "experiments_dir", "results/experiments")

    @property
    def threads(self) -> int:
        return int(self._get("execution", "threads", 1, "FIMGUARD_THREADS"))

    # desk-scale MNIST subset
    @property
    def train_limit(self) -> int:
        return int(self._get("data", "train_limit", 10000))

    @property
    def test_limit(self) -> int:
        return int(self._get("data", "test_limit", 2000))

    @property
    def log_level(self) -> str:
        return self._get("logging", "level", "INFO", "FIMGUARD_LOG_LEVEL")

    @property
    def log_format(self) -> str:
        return self._get("logging", "format", "json", "FIMGUARD_LOG_FORMAT")

    @property
    def log_file(self) -> Optional[str]:
        return self._get("logging", "file", None, "FIMGUARD_LOG_FILE") or None


settings = Settings()
