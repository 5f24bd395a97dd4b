from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

CONFIG_DIR = Path(__file__).resolve().parents[3] / "config"


def load_yaml(filename: str, config_dir: Optional[Path] = None) -> Dict[str, Any]:
    """Load a YAML file from the config directory."""
    file_path = (config_dir or CONFIG_DIR) / filename
    return load_yaml_path(file_path)


def load_yaml_path(path: Union[str, Path]) -> Dict[str, Any]:
    """Load a YAML mapping from an explicit path; empty files give an empty dict."""
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    return data or {}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``override`` into a copy of ``base``."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged
