"""
Lab configuration: uppercase defaults, an optional ``config.py`` in the
working directory and ``POWERDOWN_<KEY>`` environment overrides, applied in
that order.
"""
import importlib.util
import logging
import os
import sys
from typing import Optional

logger = logging.getLogger(__name__)

ENV_PREFIX = "POWERDOWN_"

SEED = 20240601
PSI_SIGMA = "1"
U = "1/2"
IDLE_MODE = "cumulative"
LAMBDA = "1"
EPS = "1/1000000"
GRID_STEP = "1"
MAX_GRID_STEPS = 600
VERIFY_COUNT = 1000
VERIFY_JOBS = 8
VERIFY_HORIZON = 40
WORKERS = 1
BETA = "4745/10000"
ALPHA = "21068/10000"
OUTPUT_DIR = "runs"


class ConfigError(Exception):
    """Raised when a config file cannot be loaded."""

    def __init__(self, message="Could not load config.py."):
        super().__init__(message)


class ConfigObject:
    """A simple object to hold configuration settings."""

    def __repr__(self):
        keys = ", ".join(f"{k}={getattr(self, k)!r}" for k in sorted(vars(self)))
        return f"ConfigObject({keys})"


def defaults() -> ConfigObject:
    config = ConfigObject()
    module = sys.modules[__name__]
    for key in dir(module):
        if key.isupper() and key != "ENV_PREFIX":
            setattr(config, key, getattr(module, key))
    return config


def _load_file(config: ConfigObject, path: str):
    spec = importlib.util.spec_from_file_location("powerdown_user_config", path)
    if spec is None or spec.loader is None:
        raise ConfigError(f"Could not load config.py from {path}")
    module = importlib.util.module_from_spec(spec)
    try:
        spec.loader.exec_module(module)
    except Exception as e:
        raise ConfigError(f"Could not load config.py from {path}: {e}") from e
    for key in dir(module):
        if key.isupper():
            setattr(config, key, getattr(module, key))
    logger.debug("Loaded config from %s", path)


def _apply_environment(config: ConfigObject):
    for key, value in os.environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        config_key = key[len(ENV_PREFIX):]
        if not hasattr(config, config_key):
            continue
        original_value = getattr(config, config_key)
        try:
            if isinstance(original_value, bool):
                setattr(config, config_key, value.lower() in ('true', '1', 't', 'y', 'yes'))
            elif isinstance(original_value, int):
                setattr(config, config_key, int(value))
            else:
                setattr(config, config_key, value)
            logger.info(f"⚙️  Config override: {config_key} = {getattr(config, config_key)} (from environment variable)")
        except ValueError:
            logger.warning(
                f"⚠️  Could not convert environment variable {key}='{value}' to type of original value "
                f"({type(original_value).__name__}). Keeping original value.")


def load_config(path: Optional[str] = None) -> ConfigObject:
    """
    Builds the effective configuration.

    Args:
        path: A config file to load. Defaults to ``config.py`` in the current
            working directory, which is skipped when absent.

    Returns:
        The ConfigObject with every uppercase setting.

    Raises:
        ConfigError: If an explicitly named file is missing or fails to load.
    """
    config = defaults()
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"Config file not found: {path}")
        _load_file(config, path)
    else:
        local = os.path.join(os.getcwd(), "config.py")
        if os.path.exists(local):
            _load_file(config, local)
    _apply_environment(config)
    return config
