"""
Configuration loading for stratexp.

Settings come from ``config/stratexp.yml`` (or ``--config PATH``), merged over
built-in defaults. Command-line flags override both.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from stratexp.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "config" / "stratexp.yml"


@dataclass(frozen=True)
class ReportSettings:
    decimals: int = 4
    full_precision: bool = False


@dataclass(frozen=True)
class SimulationSettings:
    seed: int = 42
    replications: int = 100_000
    workers: int = 1
    enumeration_budget: int = 10_000_000


@dataclass(frozen=True)
class AllocationSettings:
    min_per_stratum: int = 1


@dataclass(frozen=True)
class LoggingSettings:
    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file: Optional[str] = None


@dataclass(frozen=True)
class Settings:
    report: ReportSettings = field(default_factory=ReportSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    allocation: AllocationSettings = field(default_factory=AllocationSettings)
    logging: LoggingSettings = field(default_factory=LoggingSettings)


_SECTIONS = {
    "report": ReportSettings,
    "simulation": SimulationSettings,
    "allocation": AllocationSettings,
    "logging": LoggingSettings,
}


def _build_section(name: str, cls, raw: Any):
    """Coerce one YAML mapping into its settings dataclass"""
    default = cls()
    if raw is None:
        return default
    if not isinstance(raw, dict):
        raise ConfigError(f"config section '{name}' must be a mapping")

    values = {}
    for key, value in raw.items():
        if not hasattr(default, key):
            logger.debug(f"Ignoring unknown config key {name}.{key}")
            continue
        expected = getattr(default, key)
        if value is None or expected is None:
            values[key] = value
        elif isinstance(expected, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{name}.{key} must be true or false")
            values[key] = value
        elif isinstance(expected, int):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
                raise ConfigError(f"{name}.{key} must be an integer")
            values[key] = int(value)
        else:
            values[key] = str(value)
    return replace(default, **values)


def load_config(config_path: Optional[Union[str, Path]] = None) -> Settings:
    """
    Load configuration from YAML file.

    Args:
        config_path: Explicit file; ``None`` uses config/stratexp.yml when present

    Returns:
        Settings merged over defaults
    """
    explicit = config_path is not None
    path = Path(config_path) if explicit else DEFAULT_CONFIG_PATH

    if not path.is_file():
        if explicit:
            raise ConfigError(f"config file not found: {path}")
        logger.debug(f"No config file at {path}, using defaults")
        return Settings()

    try:
        with open(path, "r", encoding="utf-8-sig") as f:
            raw = yaml.safe_load(f) or {}
    except (yaml.YAMLError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e

    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")

    sections: Dict[str, Any] = {
        name: _build_section(name, cls, raw.get(name))
        for name, cls in _SECTIONS.items()
    }
    settings = Settings(**sections)
    if settings.simulation.workers < 1:
        raise ConfigError("simulation.workers must be >= 1")
    if settings.simulation.replications < 1:
        raise ConfigError("simulation.replications must be >= 1")
    logger.debug(f"Loaded configuration from {path}")
    return settings


def configure_logging(settings: LoggingSettings, level_override: Optional[str] = None):
    """Configure root logging (stderr, plus a log file when configured)"""
    level_name = (level_override or settings.level).upper()
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        raise ConfigError(f"unknown log level: {level_name}")

    handlers = [logging.StreamHandler()]
    if settings.file:
        log_path = Path(settings.file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_path))

    logging.basicConfig(level=level, format=settings.format, handlers=handlers, force=True)
