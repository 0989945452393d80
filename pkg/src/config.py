"""Run configuration: defaults < environment < config file < command line."""
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.errors import ConfigError
from src.models import SolverConfig, SweepSpec

logger = logging.getLogger(__name__)

TOOL_VERSION = "0.3.1"

# environment variable -> (section, key) in the config tree
ENV_OVERRIDES: Dict[str, Tuple[Optional[str], str]] = {
    "PBC3_SDP_SOLVER": ("solver", "sdp_solver"),
    "PBC3_JOBS": (None, "jobs"),
}

Command = Literal["keyrate-single", "keyrate-coherent", "squash-verify", "decoy-bounds"]

# distance sweeps default to 0..250 km in 10 km steps
COMMAND_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "keyrate-coherent": {"sweep": {"source_model": "squashed-coherent", "start": 0.0, "stop": 250.0, "step": 10.0}},
}


class RunConfig(BaseModel):
    """Everything one CLI invocation needs. Unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid")

    command: Command
    output: str = "output"
    format: Literal["csv", "json"] = "csv"
    jobs: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    verbose: bool = False

    sweep: SweepSpec = Field(default_factory=SweepSpec)
    solver: SolverConfig = Field(default_factory=SolverConfig)

    # squash-verify
    n_max: int = Field(default=5, ge=1)

    # decoy-bounds
    distance_km: float = Field(default=50.0, ge=0.0)
    intensities: List[float] = Field(default_factory=lambda: [0.5, 0.1, 0.001])
    observations: Optional[str] = None

    @field_validator("intensities")
    @classmethod
    def _positive(cls, v: List[float]) -> List[float]:
        if not v or any(mu <= 0 for mu in v):
            raise ValueError("intensities must be a non-empty list of positive values")
        return v

    @property
    def output_dir(self) -> Path:
        return Path(self.output)

    @property
    def output_file(self) -> Path:
        return self.output_dir / f"{self.command}.{self.format}"

    def header(self) -> Dict[str, Any]:
        return {"tool_version": TOOL_VERSION, "config": self.model_dump(mode="json")}


# --- RANGES ---

def parse_range(text: str, flag: str) -> Tuple[float, float, float]:
    """'start:stop:step' with an inclusive stop; a bare number is a one-point range."""
    parts = text.split(":")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"{flag} expects start:stop:step", {"flag": flag, "value": text}) from None
    if len(values) == 1:
        return values[0], values[0], 1.0
    if len(values) != 3:
        raise ConfigError(f"{flag} expects start:stop:step", {"flag": flag, "value": text})
    start, stop, step = values
    if step <= 0:
        raise ConfigError(f"{flag} needs a positive step", {"flag": flag, "value": text})
    return start, stop, step


def parse_floats(text: str, flag: str) -> List[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects a comma separated list of numbers",
                          {"flag": flag, "value": text}) from None


# --- RESOLUTION ---

def _merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def env_overrides() -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for name, (section, key) in ENV_OVERRIDES.items():
        value = os.getenv(name)
        if value is None or value == "":
            continue
        target = tree.setdefault(section, {}) if section else tree
        target[key] = value
        logger.debug(f"{name} sets {section + '.' if section else ''}{key}")
    return tree


def load_config_file(path: Path) -> Dict[str, Any]:
    """YAML (or JSON) mapping from disk."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("config file does not exist", {"flag": "--config", "path": str(path)})
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"config file is not valid YAML/JSON: {e}", {"flag": "--config"}) from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping", {"flag": "--config", "path": str(path)})
    return data


def resolve_config(command: str, cli: Dict[str, Any], config_path: Optional[Path] = None) -> RunConfig:
    """Build the RunConfig for ``command``; later sources win."""
    tree: Dict[str, Any] = {"command": command, **COMMAND_DEFAULTS.get(command, {})}
    tree = _merge(tree, env_overrides())
    if config_path is not None:
        file_tree = load_config_file(config_path)
        file_tree.pop("command", None)
        tree = _merge(tree, file_tree)
    tree = _merge(tree, cli)
    try:
        return RunConfig(**tree)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"invalid configuration value for '{key}': {first['msg']}",
                          {"key": key, "errors": e.error_count()}) from e
