"""
poissonet.config - Run settings for poissonet.

Settings are a flat TOML table. They resolve as defaults, then the config
file (explicit path, else settings.toml in the OS-appropriate config
directory), then command-line overrides. Every run writes its resolved
settings next to its outputs so it can be repeated exactly.
"""

import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

# Import tomli for reading TOML (built-in for Python 3.11+)
if sys.version_info >= (3, 11):
    import tomllib
else:
    try:
        import tomli as tomllib
    except ImportError:
        tomllib = None

# Import tomli_w for writing TOML
try:
    import tomli_w
except ImportError:
    tomli_w = None

logger = logging.getLogger(__name__)

WORKERS_ENV = "POISSONET_WORKERS"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

PathLike = Union[str, Path]


class ConfigError(ValueError):
    """Raised for unreadable config files and invalid settings."""


def get_config_dir() -> Path:
    """
    Get the OS-appropriate configuration directory for poissonet.

    Returns:
        Path object pointing to config directory

    Locations:
        macOS: ~/Library/Application Support/poissonet/
        Linux: ~/.config/poissonet/ (or $XDG_CONFIG_HOME/poissonet/)
        Windows: %APPDATA%/poissonet/
    """
    if sys.platform == "darwin":
        return Path.home() / "Library" / "Application Support" / "poissonet"
    elif sys.platform == "win32":
        appdata = os.getenv("APPDATA")
        if appdata:
            return Path(appdata) / "poissonet"
        return Path.home() / "poissonet"
    else:
        xdg_config = os.getenv("XDG_CONFIG_HOME")
        if xdg_config:
            return Path(xdg_config) / "poissonet"
        return Path.home() / ".config" / "poissonet"


def get_config_path() -> Path:
    """Full path to the default settings.toml."""
    return get_config_dir() / "settings.toml"


def default_workers() -> int:
    """Worker count from $POISSONET_WORKERS, else 1."""
    raw = os.getenv(WORKERS_ENV)
    if not raw:
        return 1
    try:
        return max(int(raw), 1)
    except ValueError:
        logger.warning(f"Ignoring non-integer {WORKERS_ENV}={raw!r}")
        return 1


def get_default_settings() -> Dict[str, Any]:
    """
    Get default settings for poissonet.

    box_cox_gamma is absent by default (no transform). max_parents = 0 means
    no cap beyond n - 1.

    Returns:
        Dictionary containing all default settings
    """
    return {
        # Inference settings
        "seed": 0,
        "estimator": "poisson",  # 'poisson' or 'gaussian'
        "alpha": 0.05,
        "shuffles": 200,
        "lag": 0,
        "max_parents": 0,
        "forward_null": "single",  # 'single' or 'max'
        "tail_mass": 1e-12,
        "workers": default_workers(),
        # Preprocessing settings
        "min_count": 100,
        "scale": False,
        "screen": "none",  # 'none', 'poisson', 'negbin'
        "n_boot": 200,
        # Simulation settings (high-SNR scenario)
        "nodes": 50,
        "samples": 1000,
        "er_p": 0.04,
        "edge_rate": 1.0,
        "base_rate": 1.0,
        "noise_rate": 0.5,
        # Benchmark grid
        "grid_nodes": [50],
        "grid_p": [0.04, 0.1],
        "grid_samples": [100, 250, 500, 1000],
        "methods": ["poisson", "gaussian"],
        "realizations": 50,
        # Logging settings
        "log_level": "INFO",
        "log_max_size_mb": 10,
    }


OPTIONAL_KEYS = ("box_cox_gamma",)


def load_settings(path: Optional[PathLike] = None) -> Dict[str, Any]:
    """
    Load settings from a configuration file.

    With no explicit path the default settings.toml is used if present.
    Missing keys are filled in from defaults; unknown keys are logged and
    dropped.

    Args:
        path: Explicit settings file

    Returns:
        Dictionary containing settings

    Raises:
        ConfigError: If an explicit file is missing or either file is malformed
    """
    settings = get_default_settings()
    if path is None:
        config_path = get_config_path()
        if not config_path.exists():
            return settings
    else:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}")

    if tomllib is None:
        raise ConfigError("tomli is required to read config files on Python < 3.11")

    try:
        with open(config_path, "rb") as f:
            user_settings = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"could not read settings from {config_path}: {e}") from e

    return merge_overrides(settings, user_settings, source=str(config_path))


def merge_overrides(
    settings: Mapping[str, Any], overrides: Mapping[str, Any], source: str = "overrides"
) -> Dict[str, Any]:
    """
    Return settings updated with every known, non-None override.

    Args:
        settings: Base settings
        overrides: Values that win over the base (None means "not given")
        source: Name used when logging ignored keys
    """
    merged = dict(settings)
    known = set(get_default_settings()) | set(OPTIONAL_KEYS)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in known:
            logger.warning(f"Ignoring unknown setting {key!r} from {source}")
            continue
        merged[key] = value
    return merged


def save_settings(settings: Mapping[str, Any], path: Optional[PathLike] = None) -> Path:
    """
    Save settings as TOML.

    Creates the parent directory if needed. None values are omitted since
    TOML has no null.

    Args:
        settings: Dictionary containing settings to save
        path: Target file, default settings.toml in the config directory

    Returns:
        Path written

    Raises:
        ConfigError: If tomli_w is unavailable
    """
    if tomli_w is None:
        raise ConfigError("tomli_w is required to write settings")
    config_path = Path(path) if path is not None else get_config_path()
    config_path.parent.mkdir(parents=True, exist_ok=True)
    clean = {k: v for k, v in sorted(settings.items()) if v is not None}
    with open(config_path, "wb") as f:
        tomli_w.dump(clean, f)
    return config_path


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _int_list(value: Any, minimum: int) -> bool:
    return (
        isinstance(value, list)
        and len(value) > 0
        and all(_is_int(v) and v >= minimum for v in value)
    )


def validate_settings(settings: Dict[str, Any]) -> Dict[str, Any]:
    """
    Validate settings types and ranges.

    Args:
        settings: Dictionary of settings to validate

    Returns:
        The settings, unchanged

    Raises:
        ConfigError: Naming every offending key
    """
    problems = []

    def check(key: str, ok: bool, expected: str) -> None:
        if not ok:
            problems.append(f"{key}={settings.get(key)!r} ({expected})")

    check("seed", _is_int(settings.get("seed")) and settings["seed"] >= 0, "integer >= 0")
    check("estimator", settings.get("estimator") in ("poisson", "gaussian"), "poisson or gaussian")
    alpha = settings.get("alpha")
    check("alpha", _is_number(alpha) and 0.0 < alpha < 1.0, "number in (0, 1)")
    check("shuffles", _is_int(settings.get("shuffles")) and settings["shuffles"] >= 20, "integer >= 20")
    check("lag", settings.get("lag") in (0, 1) and _is_int(settings.get("lag")), "0 or 1")
    check("max_parents", _is_int(settings.get("max_parents")) and settings["max_parents"] >= 0, "integer >= 0")
    check("forward_null", settings.get("forward_null") in ("single", "max"), "single or max")
    tail = settings.get("tail_mass")
    check("tail_mass", _is_number(tail) and 0.0 < tail < 1.0, "number in (0, 1)")
    check("workers", _is_int(settings.get("workers")) and settings["workers"] >= 1, "integer >= 1")
    check("min_count", _is_int(settings.get("min_count")) and settings["min_count"] >= 0, "integer >= 0")
    check("scale", isinstance(settings.get("scale"), bool), "true or false")
    check("screen", settings.get("screen") in ("none", "poisson", "negbin"), "none, poisson or negbin")
    check("n_boot", _is_int(settings.get("n_boot")) and settings["n_boot"] >= 1, "integer >= 1")
    check("nodes", _is_int(settings.get("nodes")) and settings["nodes"] >= 2, "integer >= 2")
    check("samples", _is_int(settings.get("samples")) and settings["samples"] >= 1, "integer >= 1")
    er_p = settings.get("er_p")
    check("er_p", _is_number(er_p) and 0.0 <= er_p <= 1.0, "number in [0, 1]")
    for key in ("edge_rate", "base_rate", "noise_rate"):
        value = settings.get(key)
        check(key, _is_number(value) and value >= 0.0, "number >= 0")
    check("grid_nodes", _int_list(settings.get("grid_nodes"), 2), "non-empty list of integers >= 2")
    check("grid_samples", _int_list(settings.get("grid_samples"), 4), "non-empty list of integers >= 4")
    grid_p = settings.get("grid_p")
    check(
        "grid_p",
        isinstance(grid_p, list) and grid_p and all(_is_number(p) and 0.0 <= p <= 1.0 for p in grid_p),
        "non-empty list of numbers in [0, 1]",
    )
    methods = settings.get("methods")
    check(
        "methods",
        isinstance(methods, list) and methods and all(m in ("poisson", "gaussian") for m in methods),
        "non-empty list of poisson/gaussian",
    )
    check("realizations", _is_int(settings.get("realizations")) and settings["realizations"] >= 1, "integer >= 1")
    check("log_level", str(settings.get("log_level")).upper() in LOG_LEVELS, "logging level name")
    size = settings.get("log_max_size_mb")
    check("log_max_size_mb", _is_number(size) and 1 <= size <= 100, "number in [1, 100]")
    gamma = settings.get("box_cox_gamma")
    if gamma is not None:
        check("box_cox_gamma", _is_number(gamma), "number")

    if problems:
        raise ConfigError("invalid settings: " + "; ".join(problems))
    return settings
