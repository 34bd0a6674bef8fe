"""Configuration file handling for ptwell."""

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional

# Try to import tomllib (Python 3.11+) or fall back to tomli
try:
    import tomllib
except ImportError:
    try:
        import tomli as tomllib  # type: ignore
    except ImportError:
        tomllib = None  # type: ignore

# Config file names to search for (in order of priority)
CONFIG_FILE_NAMES = [
    ".ptwell.toml",
    "ptwell.toml",
]

# Default config file name for saving
DEFAULT_CONFIG_FILE = ".ptwell.toml"

# Section of every setting in the TOML layout
SECTIONS = {
    "kappa_min": "scan",
    "step": "scan",
    "refine_tol": "scan",
    "residual_tol": "scan",
    "steps": "sweep",
    "collision_delta": "sweep",
    "ep_tol": "sweep",
    "truncation": "metric",
    "grid": "metric",
    "omega": "metric",
    "threads": "advanced",
    "verbose": "advanced",
    "quiet": "advanced",
}


@dataclass
class Config:
    """Numerical defaults shared by all subcommands."""

    # Root scan
    kappa_min: float = 1e-3
    step: float = math.pi / 40
    refine_tol: float = 1e-12
    residual_tol: float = 1e-10

    # Continuation
    steps: int = 401
    collision_delta: float = 1e-3
    ep_tol: float = 1e-8

    # Metric
    truncation: int = 12
    grid: int = 1024
    omega: str = "inv-mu2"

    # Advanced settings
    threads: int = 0
    verbose: bool = False
    quiet: bool = False

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Config":
        """
        Create a Config from a dictionary.

        Keys may sit in their section ([scan], [sweep], [metric], [advanced])
        or at the top level; unknown keys are ignored.

        Args:
            data: Configuration dictionary

        Returns:
            Config instance
        """
        values: Dict[str, Any] = {}
        for name, section in SECTIONS.items():
            nested = data.get(section, {})
            if name in nested:
                values[name] = nested[name]
            elif name in data:
                values[name] = data[name]
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert Config to a dictionary suitable for saving.

        Returns:
            Configuration dictionary with nested sections
        """
        config: Dict[str, Dict[str, Any]] = {}
        for item in fields(self):
            config.setdefault(SECTIONS[item.name], {})[item.name] = getattr(self, item.name)
        return config

    def to_toml(self) -> str:
        """
        Convert Config to TOML string.

        Returns:
            TOML formatted configuration string
        """
        lines = [
            "# ptwell configuration",
            "# Command-line flags override these values.",
            "",
        ]
        for section, values in self.to_dict().items():
            lines.append(f"[{section}]")
            for key, value in values.items():
                if isinstance(value, bool):
                    rendered = str(value).lower()
                elif isinstance(value, str):
                    rendered = f'"{value}"'
                else:
                    rendered = repr(value)
                lines.append(f"{key} = {rendered}")
            lines.append("")
        return "\n".join(lines)


def find_config_file(start_dir: Optional[str] = None) -> Optional[Path]:
    """
    Find a configuration file by searching in standard locations.

    Search order:
    1. Current directory
    2. User's home directory

    Args:
        start_dir: Directory to start searching from (defaults to cwd)

    Returns:
        Path to config file if found, None otherwise
    """
    search_dirs = [Path(start_dir) if start_dir else Path.cwd()]
    home = Path.home()
    if home not in search_dirs:
        search_dirs.append(home)

    for directory in search_dirs:
        for filename in CONFIG_FILE_NAMES:
            config_path = directory / filename
            if config_path.exists():
                return config_path
    return None


def load_config(config_path: Optional[str] = None) -> Optional[Config]:
    """
    Load configuration from a file.

    Args:
        config_path: Path to config file (auto-detected if None)

    Returns:
        Config instance if loaded, None if no config found or unreadable
    """
    if tomllib is None:
        return None

    if config_path:
        path = Path(config_path)
        if not path.exists():
            return None
    else:
        path = find_config_file()
        if path is None:
            return None

    try:
        with path.open("rb") as f:
            data = tomllib.load(f)
        return Config.from_dict(data)
    except (OSError, ValueError, TypeError):
        return None


def save_config(config: Config, config_path: Optional[str] = None) -> str:
    """
    Save configuration to a file.

    Args:
        config: Config instance to save
        config_path: Path to save to (defaults to .ptwell.toml in cwd)

    Returns:
        Path to saved config file
    """
    path = Path(config_path) if config_path else Path.cwd() / DEFAULT_CONFIG_FILE
    path.write_text(config.to_toml(), encoding="utf-8")
    return str(path)


def merge_config_with_args(config: Optional[Config], args: Any) -> None:
    """
    Fill unset command-line options from the configuration.

    Options left at None on the command line take the config value, then the
    built-in default; boolean flags are switched on when the config enables
    them. This modifies the args namespace in place.

    Args:
        config: Config instance (can be None)
        args: argparse.Namespace to update
    """
    config = config or Config()
    for item in fields(config):
        if not hasattr(args, item.name):
            continue
        value = getattr(config, item.name)
        current = getattr(args, item.name)
        if isinstance(value, bool):
            setattr(args, item.name, bool(current) or value)
        elif current is None:
            setattr(args, item.name, value)


def get_config_path_for_display(config_path: Optional[str] = None) -> Optional[str]:
    """
    Get the path to config file for display purposes.

    Args:
        config_path: Explicit config path, or None for auto-detection

    Returns:
        Path to config file if found, None otherwise
    """
    if config_path:
        path = Path(config_path)
        return str(path) if path.exists() else None

    found = find_config_file()
    return str(found) if found else None
