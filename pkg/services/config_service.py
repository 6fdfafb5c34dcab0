import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from environments.generators import build_from_generator
from environments.instance import BanditInstance, validate_instance
from policies.factory import POLICY_NAMES
from solvers.enumeration import DEFAULT_ENUMERATION_CAP

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "RISING_BANDIT_OUTPUT_DIR"


class ConfigError(ValueError):
    """Raised when an experiment configuration is missing, malformed or inconsistent."""

    def __init__(self, message: str, field_path: Optional[str] = None):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}" if field_path else message)


class InstanceSpec(BaseModel):
    """Either a catalog generator with its parameters or a fully inline instance."""
    model_config = ConfigDict(extra="forbid")

    generator: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    inline: Optional[BanditInstance] = None

    @model_validator(mode="after")
    def _one_source(self) -> "InstanceSpec":
        if (self.generator is None) == (self.inline is None):
            raise ValueError("set exactly one of 'generator' or 'inline'")
        return self


class PolicySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    params: Dict[str, Any] = Field(default_factory=dict)
    label: Optional[str] = None

    @field_validator("name")
    @classmethod
    def _known_policy(cls, value: str) -> str:
        if value not in POLICY_NAMES:
            raise ValueError(f"unknown policy '{value}', expected one of {', '.join(POLICY_NAMES)}")
        return value

    @property
    def display_name(self) -> str:
        return self.label or self.name


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    instance: InstanceSpec
    policies: List[PolicySpec] = Field(..., min_length=1)
    horizon: int = Field(..., ge=1)
    seeds: List[int] = Field(..., min_length=1)
    output_dir: str = Field(default_factory=lambda: os.getenv(OUTPUT_DIR_ENV, "results"))
    max_concurrent_runs: int = Field(default=4, ge=1)
    record_heatmap: bool = False
    heatmap_bucket: Optional[int] = Field(default=None, ge=1)
    enumeration_cap: int = Field(default=DEFAULT_ENUMERATION_CAP, ge=1)
    sampled_regret: bool = False

    @model_validator(mode="after")
    def _unique_labels(self) -> "ExperimentConfig":
        labels = [p.display_name for p in self.policies]
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise ValueError(f"policy labels must be unique, repeated: {', '.join(duplicates)}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        return self


def _field_path(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error["loc"]) or "<root>"


def parse_experiment_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], field_path=_field_path(first))


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate an experiment config from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError("Config must be a JSON object")
    config = parse_experiment_config(data)
    logger.info(f"Loaded experiment '{config.name}' from {path}: {len(config.policies)} policies, {len(config.seeds)} seeds, T={config.horizon}")
    return config


def require_valid_instance(instance: BanditInstance) -> BanditInstance:
    """Reject an instance with any validation violation; the message lists all of them."""
    report = validate_instance(instance)
    if not report.valid:
        raise ConfigError(report.summary(), field_path="instance")
    return instance


def build_instance(config: ExperimentConfig, validate: bool = True) -> BanditInstance:
    """
    Materialise the configured instance and check that the horizon fits it.

    With `validate` the instance must also pass `validate_instance`; the `validate`
    command turns it off so it can report the violations itself.
    """
    spec = config.instance
    if spec.inline is not None:
        instance = spec.inline
    else:
        try:
            instance = build_from_generator(spec.generator, spec.params)
        except ValueError as e:
            raise ConfigError(str(e), field_path="instance.params")
    if config.horizon > instance.horizon:
        raise ConfigError(f"horizon {config.horizon} exceeds the instance horizon {instance.horizon}", field_path="horizon")
    if validate:
        require_valid_instance(instance)
    return instance
