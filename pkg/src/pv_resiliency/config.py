import logging
import os

import yaml

from pv_resiliency.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "config.yaml")
SECTIONS = ("system", "mpc", "rule_based", "solver", "scenario", "server")


def _env_bool(value):
    return value.lower() in ["1", "true", "yes"]


# Load configuration from YAML, then environment variables as overrides
def load_config(path=None):
    config_path = path or DEFAULT_CONFIG_PATH
    config = {}
    try:
        with open(config_path) as file:
            config = yaml.safe_load(file) or {}
    except FileNotFoundError:
        if path is not None:
            raise ConfigurationError(f"Configuration file not found: {path}") from None
        config = {}
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Error parsing YAML configuration: {e}") from e
    if not isinstance(config, dict):
        raise ConfigurationError(f"Configuration document must be a mapping, got {type(config).__name__}")

    unknown = set(config) - set(SECTIONS)
    if unknown:
        raise ConfigurationError(f"Unknown configuration sections: {sorted(unknown)}")
    merged = {section: dict(config.get(section) or {}) for section in SECTIONS}

    # Environment variable overrides
    output_dir = os.environ.get("PV_RESILIENCY_OUTPUT_DIR")
    if output_dir:
        merged["scenario"]["output_dir"] = output_dir
    try:
        time_limit = os.environ.get("PV_RESILIENCY_SOLVER_TIME_LIMIT")
        if time_limit:
            merged["solver"]["time_limit"] = float(time_limit)
        node_limit = os.environ.get("PV_RESILIENCY_SOLVER_NODE_LIMIT")
        if node_limit:
            merged["solver"]["node_limit"] = int(node_limit)
        server_port = os.environ.get("MCP_SERVER_PORT")
        merged["server"]["port"] = int(server_port or merged["server"].get("port", 8000))
    except ValueError as e:
        raise ConfigurationError(f"Invalid numeric environment override: {e}") from e
    server_debug = os.environ.get("MCP_SERVER_DEBUG")
    if server_debug is not None:
        merged["server"]["debug"] = _env_bool(server_debug)
    else:
        merged["server"]["debug"] = bool(merged["server"].get("debug", False))

    logger.debug(f"Loaded configuration from {config_path}")
    return merged


def check_keys(data, allowed, section):
    """Rejects keys a typed config object does not know about."""
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigurationError(f"Unknown keys in '{section}': {sorted(unknown)}")
