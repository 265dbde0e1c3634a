"""
Configuration loader for the DPMIL pipeline.

Loads configuration from a YAML file and environment variables. Keeps the
line number of every key so that schema errors can point at the offending
line.
"""

import os
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv

from src.utils.constants import LOG_LEVEL_ENV, THREADS_ENV
from src.utils.validators import ConfigError

ENV_PREFIX = "DPMIL_"


class ConfigLoader:
    """
    Load and manage pipeline configuration.

    Values are resolved in order:
    1. Environment variables (DPMIL_SECTION_KEY, from the process or .env)
    2. The YAML config file
    3. Default values
    """

    def __init__(
        self,
        config_path: Optional[Union[str, Path]] = None,
        env_file: Union[str, Path] = ".env",
    ):
        """
        Initialise configuration loader.

        Args:
            config_path: YAML file with nested sections; None means defaults only
            env_file: Path to .env file (optional)
        """
        self.config_path = Path(config_path) if config_path is not None else None
        self.env_file = Path(env_file)

        if self.env_file.exists():
            load_dotenv(self.env_file)

        self.values: Dict[str, Any] = {}
        self.key_lines: Dict[str, int] = {}

        if self.config_path is not None:
            self._load_yaml(self.config_path)

    def _load_yaml(self, path: Path) -> None:
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")

        text = path.read_text(encoding="utf-8")
        try:
            root = yaml.compose(text, Loader=yaml.SafeLoader)
            data = yaml.safe_load(text)
        except yaml.MarkedYAMLError as e:
            mark = e.problem_mark or e.context_mark
            line = mark.line + 1 if mark is not None else None
            raise ConfigError(f"cannot parse {path}: {e.problem or e}", line=line) from e

        if data is None:
            return
        if not isinstance(data, dict):
            raise ConfigError(f"{path} must contain a mapping of sections", line=1)

        self.values = data
        self._index_lines(root, prefix="")

    def _index_lines(self, node: yaml.Node, prefix: str) -> None:
        # Record the source line of every (possibly nested) key.
        if not isinstance(node, yaml.MappingNode):
            return
        for key_node, value_node in node.value:
            dotted = f"{prefix}{key_node.value}"
            self.key_lines[dotted] = key_node.start_mark.line + 1
            self._index_lines(value_node, prefix=f"{dotted}.")

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get a configuration value.

        Args:
            key: Dotted key, e.g. 'coteach.epochs'
            default: Value if the key is set nowhere

        Example:
            >>> config.get('coteach.epochs')
            20
        """
        env_value = os.getenv(ENV_PREFIX + key.upper().replace(".", "_"))
        if env_value is not None:
            return yaml.safe_load(env_value)

        value: Any = self.values
        for part in key.split("."):
            if isinstance(value, dict) and part in value:
                value = value[part]
            else:
                return default
        return value

    def line_of(self, key: str) -> Optional[int]:
        """Line number of a dotted key in the config file, if it came from there."""
        return self.key_lines.get(key)

    def sections(self) -> Iterator[Tuple[str, Any]]:
        """Iterate over top-level (section, mapping) pairs."""
        yield from self.values.items()

    def get_threads(self) -> Optional[int]:
        """
        Parallelism cap from DPMIL_THREADS.

        Returns:
            Positive thread count, or None if unset
        """
        raw = os.getenv(THREADS_ENV)
        if raw is None or raw.strip() == "":
            return None
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
        if threads < 1:
            raise ConfigError(f"{THREADS_ENV} must be at least 1, got {threads}")
        return threads

    def get_log_level(self, default: str = "INFO") -> str:
        return os.getenv(LOG_LEVEL_ENV, default)

