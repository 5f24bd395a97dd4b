# src/qudit_odmr/config.py

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ExperimentConfigError
from .models.experiment import ExperimentConfig
from .utils.yaml_loader import CONFIG_DIR, deep_merge, load_yaml, load_yaml_path

logger = logging.getLogger(__name__)

DEFAULTS_FILE = "defaults.yaml"


class Settings(BaseSettings):
    """Process-level settings from the environment (prefix QUDIT_ODMR_) or a .env file."""
    model_config = SettingsConfigDict(env_prefix="QUDIT_ODMR_", env_file=".env", extra="ignore")

    out_dir: str = "runs"
    log_level: str = "INFO"
    log_to_file: bool = False
    log_dir: str = "logs"


class Config:
    """Configuration manager for simulator runs."""

    def __init__(self, config_dir: Optional[Path] = None):
        """Initialize configuration from the bundled defaults file."""
        self.config_dir = Path(config_dir) if config_dir else CONFIG_DIR
        defaults_path = self.config_dir / DEFAULTS_FILE
        if defaults_path.exists():
            self.defaults = load_yaml(DEFAULTS_FILE, self.config_dir)
        else:
            logger.warning(f"{defaults_path} not found; using built-in defaults")
            self.defaults = {}

    # ========== Property Methods ==========

    @property
    def center(self) -> Dict[str, Any]:
        """Color-center parameters."""
        return self.defaults.get("center", {})

    @property
    def distribution(self) -> Dict[str, Any]:
        """Inhomogeneous distribution of D and the local field."""
        return self.defaults.get("distribution", {})

    @property
    def pump(self) -> Dict[str, Any]:
        """Optical pumping and readout contrast."""
        return self.defaults.get("optical", {})

    @property
    def cw_drive(self) -> Dict[str, Any]:
        return self.defaults.get("cw", {})

    @property
    def pulse_calibration(self) -> Dict[str, Any]:
        return self.defaults.get("pulses", {})

    @property
    def grids(self) -> Dict[str, Any]:
        """Frequency, field and time grids of every subcommand."""
        cw = self.cw_drive
        pulses = self.pulse_calibration
        modemap = self.defaults.get("modemap", {})
        return {
            "odmr": {"span": cw.get("span"), "step": cw.get("step")},
            "modemap": {k: modemap.get(k) for k in ("bz_start", "bz_stop", "bz_step", "span", "step")},
            "ramsey": {"tau_stop": pulses.get("tau_stop"), "tau_step": pulses.get("tau_step")},
            "rabi": {"rabi_stop": pulses.get("rabi_stop"), "rabi_step": pulses.get("rabi_step")},
        }

    # ========== Run configuration ==========

    def build_experiment(self, user_file: Optional[str] = None,
                         overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
        """Deep-merge defaults, an optional user YAML file and CLI overrides."""
        merged = dict(self.defaults)
        if user_file:
            try:
                merged = deep_merge(merged, load_yaml_path(user_file))
            except FileNotFoundError as e:
                raise ExperimentConfigError(f"config file not found: {user_file}") from e
            except Exception as e:
                raise ExperimentConfigError(f"{user_file}: {e}") from e
        if overrides:
            merged = deep_merge(merged, overrides)
        return ExperimentConfig.model_validate(merged)

    def load_table(self, name: str) -> List[Dict[str, Any]]:
        """Rows of a bundled (or explicit-path) measurement table."""
        path = Path(name)
        try:
            data = load_yaml_path(path) if path.exists() else load_yaml(name, self.config_dir)
        except OSError as e:
            raise ExperimentConfigError(f"measurement table {name} not found") from e
        rows = data.get("measurements", [])
        if not rows:
            raise ExperimentConfigError(f"{name} has no measurements")
        return rows

    # ========== Validation ==========

    def validate_configuration(self) -> Dict[str, bool]:
        """Check that the defaults build a valid experiment."""
        results = {"defaults_file": bool(self.defaults)}
        try:
            self.build_experiment()
            results["experiment"] = True
        except (ValidationError, ExperimentConfigError) as e:
            logger.error(f"Default configuration is invalid: {e}")
            results["experiment"] = False
        try:
            results["ramsey_measurements"] = bool(self.load_table("ramsey_measurements.yaml"))
        except (OSError, ExperimentConfigError):
            results["ramsey_measurements"] = False
        return results

    def get_configuration_summary(self) -> Dict[str, Any]:
        """Get a summary of the current configuration."""
        return {
            "config_dir": str(self.config_dir),
            "center": self.center,
            "distribution": self.distribution,
            "grids": self.grids,
            "validation": self.validate_configuration(),
        }
