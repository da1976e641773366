"""
Run configuration: TOML file discovery, loading and validation
"""

import logging
import os
from typing import Any, Dict, Optional

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .embed import OOV_POLICIES
from .errors import ConfigError
from .models import PREDICTION_MODES, Variant
from .neural import TrainConfig
from .retrieval import MAP_MODES, SAMPLING_MODES
from .scoring import RECALL_MODES

logger = logging.getLogger(__name__)

# Config file locations (in order of preference)
CONFIG_PATHS = [
    os.path.expanduser("~/.config/frameverify/config.toml"),  # User config
    "/etc/frameverify/config.toml",  # System config
    os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config.toml"),  # Packaged
]

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def _one_of(value: str, allowed, name: str) -> str:
    if value not in allowed:
        raise ValueError(f"{name} must be one of {', '.join(allowed)}; got {value!r}")
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PathsConfig(_Section):
    corpus: Optional[str] = None
    claims: Optional[str] = None
    dev_claims: Optional[str] = None
    embeddings: Optional[str] = None
    lexicon: Optional[str] = None
    output_dir: str = "frameverify-out"

    @field_validator("*", mode="after")
    @classmethod
    def _expand(cls, value: Optional[str]) -> Optional[str]:
        return os.path.expanduser(value) if value else value


class RetrievalConfig(_Section):
    K: int = Field(default=3, ge=0)
    M: int = Field(default=0, ge=0)
    map_mode: str = "map-augment"
    sampling: str = "top"
    max_ngram: int = Field(default=5, ge=1)
    seed: int = 13

    @field_validator("map_mode")
    @classmethod
    def _check_map_mode(cls, value: str) -> str:
        return _one_of(value, MAP_MODES, "map_mode")

    @field_validator("sampling")
    @classmethod
    def _check_sampling(cls, value: str) -> str:
        return _one_of(value, SAMPLING_MODES, "sampling")

    @model_validator(mode="after")
    def _check_pool_size(self) -> "RetrievalConfig":
        if self.K + self.M == 0:
            raise ValueError("K + M must be at least 1")
        return self


class EmbeddingConfig(_Section):
    dim: int = Field(default=50, ge=1)
    oov: str = "zero"

    @field_validator("oov")
    @classmethod
    def _check_oov(cls, value: str) -> str:
        return _one_of(value, OOV_POLICIES, "oov")


class ModelConfig(_Section):
    variant: Variant = Variant.V1

    @field_validator("variant", mode="before")
    @classmethod
    def _parse_variant(cls, value: Any) -> Variant:
        return Variant.parse(value)


class PredictionConfig(_Section):
    utility_filter: bool = False
    threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    jobs: int = Field(default=1, ge=1)

    @property
    def mode(self) -> str:
        return PREDICTION_MODES[1] if self.utility_filter else PREDICTION_MODES[0]


class ScoringConfig(_Section):
    recall_mode: str = "strict"
    max_evidence: Optional[int] = Field(default=None, ge=1)

    @field_validator("recall_mode")
    @classmethod
    def _check_recall_mode(cls, value: str) -> str:
        return _one_of(value, RECALL_MODES, "recall_mode")


class LoggingConfig(_Section):
    level: str = "INFO"

    @field_validator("level", mode="before")
    @classmethod
    def _check_level(cls, value: str) -> str:
        return _one_of(str(value).upper(), LOG_LEVELS, "level")


class RunConfig(BaseModel):
    """Everything a pipeline run needs; mirrors the sections of config.toml."""

    model_config = ConfigDict(extra="forbid")

    paths: PathsConfig = PathsConfig()
    retrieval: RetrievalConfig = RetrievalConfig()
    embedding: EmbeddingConfig = EmbeddingConfig()
    training: TrainConfig = TrainConfig()
    model: ModelConfig = ModelConfig()
    prediction: PredictionConfig = PredictionConfig()
    scoring: ScoringConfig = ScoringConfig()
    logging: LoggingConfig = LoggingConfig()

    @model_validator(mode="after")
    def _sync_pool_size(self) -> "RunConfig":
        # The networks are sized by the retrieval pool
        if (self.training.K, self.training.M) != (self.retrieval.K, self.retrieval.M):
            self.training = self.training.model_copy(update={"K": self.retrieval.K, "M": self.retrieval.M})
        return self

    @classmethod
    def from_mapping(cls, data: Dict[str, Any], source: str = "<config>") -> "RunConfig":
        data = dict(data)
        training = dict(data.get("training", {}))
        # K and M are owned by [retrieval]
        for key in ("K", "M"):
            if key in training:
                raise ConfigError(f"{source}: set {key} in [retrieval], not [training]")
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"{source}: {_describe(e)}") from e

    def with_overrides(self, **sections: Dict[str, Any]) -> "RunConfig":
        """
        Return a re-validated copy with per-section overrides, e.g.
        with_overrides(retrieval={"K": 5}, training={"epochs": 100}).
        None values are ignored so unset command-line flags keep file values.
        """
        data = self.model_dump(mode="json")
        for section, updates in sections.items():
            if section not in data:
                raise ConfigError(f"unknown config section {section!r}")
            data[section].update({key: value for key, value in (updates or {}).items() if value is not None})
        data["training"].pop("K", None)
        data["training"].pop("M", None)
        return RunConfig.from_mapping(data, source="command line")


def _describe(error: ValidationError) -> str:
    parts = []
    for detail in error.errors():
        location = ".".join(str(part) for part in detail.get("loc", ()))
        parts.append(f"{location}: {detail.get('msg')}")
    return "; ".join(parts)


def find_config_file() -> Optional[str]:
    """Find the first available config file"""
    for path in CONFIG_PATHS:
        if os.path.exists(path):
            return path
    return None


def load_config(config_path: Optional[str] = None) -> RunConfig:
    """Load configuration from a TOML file; the search list is used when no path is given."""
    if config_path is None:
        config_path = find_config_file()
        if config_path is None:
            raise ConfigError("no config file found; looked in " + ", ".join(CONFIG_PATHS))
    elif not os.path.exists(config_path):
        raise ConfigError(f"config file not found: {config_path}")

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = toml.load(f)
    except toml.TomlDecodeError as e:
        raise ConfigError(f"error loading config from {config_path}: {e}") from e

    logger.debug("Loaded config from %s", config_path)
    return RunConfig.from_mapping(data, source=config_path)
