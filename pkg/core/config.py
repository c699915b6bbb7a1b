"""
Configuration Loader for dllm_agent_lab

This module provides centralized configuration management with:
- Ambient settings (log directory, log level, data directory) loaded via
  python-dotenv and validated on first access
- Run-config files (JSON or key=value lines) that mirror CLI flags
- The exception hierarchy shared by every package
- Human-readable error messages with actionable fixes

Ambient settings never influence results. Everything that does (seeds,
sizes, budgets, learning rates) comes from run-config files or flags so a
run directory's manifest is sufficient to reproduce it.

Usage:
    from core.config import get_config, load_run_config

    config = get_config()
    print(config.log_dir)

    overrides = load_run_config("configs/desk.json")
"""

import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

from core.utils import get_project_root, resolve_path


# ============================================
# Exceptions
# ============================================


class LabError(Exception):
    """Base class for every error raised deliberately by the lab."""


class ConfigurationError(LabError):
    """
    Raised when configuration is invalid or incomplete.

    Attributes:
        message: Human-readable description of the error
        fix: Actionable instructions to resolve the issue
    """

    def __init__(self, message: str, fix: str = ""):
        self.message = message
        self.fix = fix
        super().__init__(self._format_error())

    def _format_error(self) -> str:
        """Format error message with fix instructions."""
        error_text = f"\n{'='*60}\nCONFIGURATION ERROR\n{'='*60}\n\n{self.message}"
        if self.fix:
            error_text += f"\n\nHOW TO FIX:\n{self.fix}"
        error_text += f"\n\n{'='*60}\n"
        return error_text


class GenerationError(LabError):
    """Raised when a task cannot be solved in the world it was drawn from."""


class DatasetError(LabError):
    """
    Raised when an episode contains an action the parser rejects.

    Attributes:
        episode_id: Task id of the offending episode
        round_index: Zero-based round index inside the episode
    """

    def __init__(self, message: str, episode_id: str, round_index: int):
        self.episode_id = episode_id
        self.round_index = round_index
        super().__init__(f"{message} (episode={episode_id}, round={round_index})")


class NumericError(LabError):
    """
    Raised when activations, gradients or losses stop being finite.

    Attributes:
        where: Layer index, parameter name or training step that failed
    """

    def __init__(self, message: str, where: Union[int, str, None] = None):
        self.where = where
        super().__init__(message if where is None else f"{message} [{where}]")


class TraceSchemaError(LabError):
    """
    Raised when a decode-trace or episode-log line does not follow its schema.

    Attributes:
        line_number: One-based line number in the JSONL input
    """

    def __init__(self, message: str, line_number: int):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


# ============================================
# Ambient Configuration
# ============================================


@dataclass(frozen=True)
class Config:
    """
    Ambient configuration container.

    Attributes:
        data_dir: Default root for generated run directories
        log_dir: Directory for log files
        log_level: Logging level string (DEBUG, INFO, etc.)
    """

    data_dir: Path
    log_dir: Path
    log_level: str


# Singleton instance to avoid repeated validation
_config_instance: Optional[Config] = None

VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def get_config(force_reload: bool = False) -> Config:
    """
    Load and validate ambient configuration from the environment.

    This function:
    1. Loads a .env file if present (working directory, then project root)
    2. Validates LAB_LOG_LEVEL, LAB_LOG_DIR and LAB_DATA_DIR
    3. Returns a cached Config object

    Args:
        force_reload: If True, reload configuration even if already cached

    Returns:
        Validated Config object

    Raises:
        ConfigurationError: If any setting is invalid
    """
    global _config_instance

    if _config_instance is not None and not force_reload:
        return _config_instance

    for env_path in (Path.cwd() / ".env", get_project_root() / ".env"):
        if env_path.exists():
            load_dotenv(env_path)
            break

    logger = logging.getLogger("config")

    log_level = os.getenv("LAB_LOG_LEVEL", "INFO").upper()
    if log_level not in VALID_LOG_LEVELS:
        raise ConfigurationError(
            message=f"Invalid LAB_LOG_LEVEL: {log_level}",
            fix=f"LAB_LOG_LEVEL must be one of: {', '.join(VALID_LOG_LEVELS)}"
        )

    log_dir = resolve_path(os.getenv("LAB_LOG_DIR"), "./logs")
    data_dir = resolve_path(os.getenv("LAB_DATA_DIR"), "./runs")

    _config_instance = Config(data_dir=data_dir, log_dir=log_dir, log_level=log_level)
    logger.debug(f"Ambient configuration loaded: log_dir={log_dir}, level={log_level}")
    return _config_instance


def setup_logging(config: Config, name: str = "dllm_agent_lab", verbose: bool = False) -> logging.Logger:
    """
    Configure application logging based on Config settings.

    Installs a console handler and a file handler rotated daily on the root
    logger, so every module-level logger in the packages is captured.

    Args:
        config: Validated configuration object
        name: Log file stem
        verbose: Force DEBUG regardless of LAB_LOG_LEVEL

    Returns:
        The root logger
    """
    from logging.handlers import TimedRotatingFileHandler

    level = logging.DEBUG if verbose else getattr(logging, config.log_level)
    logger = logging.getLogger()
    logger.setLevel(level)
    logger.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(logging.Formatter(
        "%(asctime)s [%(levelname)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    ))
    logger.addHandler(console_handler)

    try:
        config.log_dir.mkdir(parents=True, exist_ok=True)
    except PermissionError:
        raise ConfigurationError(
            message=f"Cannot create log directory: {config.log_dir}",
            fix=(
                f"1. Create the directory manually: mkdir -p {config.log_dir}\n"
                "2. Ensure you have write permissions\n"
                "3. Or set LAB_LOG_DIR to a different location in .env"
            )
        )

    file_handler = TimedRotatingFileHandler(
        config.log_dir / f"{name}.log",
        when="midnight",
        interval=1,
        backupCount=30,
        encoding="utf-8"
    )
    file_handler.setLevel(level)
    file_handler.setFormatter(logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"
    ))
    logger.addHandler(file_handler)

    return logger


# ============================================
# Run-Config Files
# ============================================


def _coerce_scalar(raw: str) -> Any:
    """Interpret a key=value right-hand side as JSON when possible."""
    text = raw.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_run_config(path: Union[str, Path, None]) -> Dict[str, Any]:
    """
    Load a run-config file whose keys mirror CLI flag names.

    Two formats are accepted:
    - a JSON object ({"seed": 7, "entities": 20})
    - key=value lines (blank lines and '#' comments ignored)

    Dashes in keys are normalized to underscores so 'tool-cap' and
    'tool_cap' are the same setting.

    Args:
        path: Config file path, or None for an empty config

    Returns:
        Mapping of normalized keys to values

    Raises:
        ConfigurationError: If the file is missing or malformed
    """
    if path is None:
        return {}

    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(
            message=f"Run config file not found: {path}",
            fix="Pass an existing JSON or key=value file to --config"
        )

    text = path.read_text(encoding="utf-8")
    stripped = text.strip()

    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as e:
            raise ConfigurationError(
                message=f"Run config {path} is not valid JSON: {e}",
                fix="Fix the JSON syntax or switch to key=value lines"
            )
        return {str(k).replace("-", "_"): v for k, v in data.items()}

    values: Dict[str, Any] = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(
                message=f"Run config {path}, line {line_number}: expected key=value, got '{line}'",
                fix="Write one setting per line, e.g. seed=7"
            )
        key, raw = line.split("=", 1)
        values[key.strip().replace("-", "_")] = _coerce_scalar(raw)
    return values
