"""
Configuration management for the TA synchronization simulator.
"""

import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Load environment variables from .env file
load_dotenv()

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class SimulatorConfig:
    """
    Process-wide operational settings.

    Nothing here changes simulation results: seeds, trial counts, confidence
    and budget targets come only from flags, ``--config`` files or fixed
    defaults.
    """

    # Output Configuration
    output_dir: str = ""  # relative --output paths resolve under this directory

    # Execution Configuration
    workers: int = 1
    max_retained_samples: int = 10_000_000

    # Logging Configuration
    log_level: str = "WARNING"


def load_config() -> SimulatorConfig:
    """
    Load configuration from environment variables.

    Returns:
        SimulatorConfig: Configuration object with values from environment variables
    """
    config = SimulatorConfig()

    config.output_dir = os.getenv("TASYNC_OUTPUT_DIR", config.output_dir)

    config.workers = int(os.getenv("TASYNC_WORKERS", str(config.workers)))
    config.max_retained_samples = int(
        os.getenv("TASYNC_MAX_RETAINED_SAMPLES", str(config.max_retained_samples))
    )

    config.log_level = os.getenv("TASYNC_LOG_LEVEL", config.log_level).upper()

    return config


def validate_config(config: SimulatorConfig) -> list[str]:
    """
    Validate configuration and return list of validation errors.

    Args:
        config: Configuration object to validate

    Returns:
        List of validation error messages (empty if valid)
    """
    errors = []

    if config.workers <= 0:
        errors.append("TASYNC_WORKERS must be positive")

    if config.max_retained_samples <= 0:
        errors.append("TASYNC_MAX_RETAINED_SAMPLES must be positive")

    if config.log_level not in _LOG_LEVELS:
        errors.append(f"TASYNC_LOG_LEVEL must be one of {', '.join(_LOG_LEVELS)}")

    return errors


def get_config() -> SimulatorConfig:
    """
    Get validated configuration.

    Returns:
        SimulatorConfig: Validated configuration object

    Raises:
        ValueError: If configuration is invalid
    """
    config = load_config()
    errors = validate_config(config)

    if errors:
        error_msg = "Configuration validation failed:\n" + "\n".join(
            f"  - {error}" for error in errors
        )
        logger.error(error_msg)
        raise ValueError(error_msg)

    logger.info(
        "Configuration loaded successfully",
        extra={
            "output_dir": config.output_dir,
            "workers": config.workers,
            "max_retained_samples": config.max_retained_samples,
            "action": "config_loaded",
        },
    )

    return config
