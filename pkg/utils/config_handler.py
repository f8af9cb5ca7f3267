"""
Config handler for reading and validating key=value pipeline settings
"""

import os
from typing import Dict, List, Optional, Sequence, Tuple

from rawband.errors import BundleIOError, ConfigError
from utils.logger import pipeline_logger


class ConfigHandler:
    """Holds key=value settings from a config file plus command-line overrides"""

    def __init__(self, values: Optional[Dict[str, str]] = None, source: str = "<defaults>"):
        self.valid_yes_responses = ['y', 'yes', 'true', 'on', '1']
        self.valid_no_responses = ['n', 'no', 'false', 'off', '0']
        self.values: Dict[str, str] = dict(values or {})
        self.source = source
        self.logger = pipeline_logger

    @classmethod
    def from_file(cls, path: str) -> "ConfigHandler":
        """Parse a config file; '#' starts a comment"""
        try:
            with open(path, 'r', encoding='utf-8') as f:
                lines = f.readlines()
        except OSError as e:
            raise BundleIOError(path, e) from e
        return cls(cls.parse_lines(lines, path), source=path)

    @staticmethod
    def parse_lines(lines: Sequence[str], source: str = "<text>") -> Dict[str, str]:
        """Parse key=value lines into a dict"""
        values: Dict[str, str] = {}
        for number, raw in enumerate(lines, 1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(line, f"{source}:{number}: expected key=value")
            key, value = line.split('=', 1)
            key = key.strip()
            if not key:
                raise ConfigError("", f"{source}:{number}: empty key")
            values[key] = value.strip()
        return values

    def override(self, overrides: Dict[str, Optional[object]]):
        """Apply command-line flags; None means the flag was not given"""
        for key, value in overrides.items():
            if value is None:
                continue
            self.values[key] = str(value)
            self.logger.debug("Config override", {"key": key, "value": value})

    def has(self, key: str) -> bool:
        return key in self.values

    def get_string(self, key: str, default: Optional[str] = None, allow_empty: bool = False) -> Optional[str]:
        """Get a string value"""
        value = self.values.get(key)
        if value is None:
            return default
        if not value and not allow_empty:
            raise ConfigError(key, "value must not be empty")
        return value

    def get_integer(self, key: str, default: Optional[int] = None,
                    min_val: int = None, max_val: int = None) -> Optional[int]:
        """Get an integer value with optional range validation"""
        value = self.values.get(key)
        if value is None:
            return default
        try:
            number = int(value)
        except ValueError:
            raise ConfigError(key, f"'{value}' is not a valid integer") from None

        if min_val is not None and number < min_val:
            raise ConfigError(key, f"must be at least {min_val}, got {number}")
        if max_val is not None and number > max_val:
            raise ConfigError(key, f"must be at most {max_val}, got {number}")
        return number

    def get_float(self, key: str, default: Optional[float] = None,
                  min_val: float = None, max_val: float = None,
                  max_exclusive: bool = False) -> Optional[float]:
        """Get a real value with optional range validation"""
        value = self.values.get(key)
        if value is None:
            return default
        try:
            number = float(value)
        except ValueError:
            raise ConfigError(key, f"'{value}' is not a valid number") from None

        if min_val is not None and number < min_val:
            raise ConfigError(key, f"must be at least {min_val}, got {number}")
        if max_val is not None:
            if number > max_val or (max_exclusive and number == max_val):
                bound = "below" if max_exclusive else "at most"
                raise ConfigError(key, f"must be {bound} {max_val}, got {number}")
        return number

    def get_yes_no(self, key: str, default: bool = False) -> bool:
        """Get a boolean value"""
        value = self.values.get(key)
        if value is None:
            return default
        response = value.strip().lower()
        if response in self.valid_yes_responses:
            return True
        if response in self.valid_no_responses:
            return False
        raise ConfigError(key, f"'{value}' is not yes/no")

    def get_choice(self, key: str, choices: Sequence[str], default: Optional[str] = None) -> Optional[str]:
        """Get a value restricted to a fixed vocabulary"""
        value = self.values.get(key)
        if value is None:
            return default
        if value not in choices:
            raise ConfigError(key, f"'{value}' is not one of {', '.join(choices)}")
        return value

    def get_list(self, key: str, default: Optional[List[str]] = None) -> Optional[List[str]]:
        """Get a comma-separated list"""
        value = self.values.get(key)
        if value is None:
            return default
        items = [item.strip() for item in value.split(',') if item.strip()]
        if not items:
            raise ConfigError(key, "list must not be empty")
        return items

    def get_offsets(self, prefix: str = "offset.") -> Dict[str, Tuple[int, int]]:
        """Collect per-granule manual offsets: offset.<granule_id>=<row>,<col>"""
        offsets: Dict[str, Tuple[int, int]] = {}
        for key, value in self.values.items():
            if not key.startswith(prefix):
                continue
            granule_id = key[len(prefix):]
            parts = [p.strip() for p in value.split(',')]
            if len(parts) != 2:
                raise ConfigError(key, f"expected '<row>,<col>', got '{value}'")
            try:
                offsets[granule_id] = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise ConfigError(key, f"offsets must be integers, got '{value}'") from None
        return offsets

    def resolve_path(self, key: str, default: Optional[str] = None) -> Optional[str]:
        """Resolve a path value relative to the config file's directory"""
        value = self.get_string(key, default)
        if value is None or os.path.isabs(value) or self.source.startswith("<"):
            return value
        return os.path.join(os.path.dirname(os.path.abspath(self.source)), value)
