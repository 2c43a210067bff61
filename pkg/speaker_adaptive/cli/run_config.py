import json
import tomllib
from pathlib import Path
from typing import Any, Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from speaker_adaptive.core.config import settings
from speaker_adaptive.data.generator import GeneratorConfig
from speaker_adaptive.data.split import validate_fractions
from speaker_adaptive.defaults import DEFAULT_LAMBDA_GRID, DEFAULT_SPLIT_FRACTIONS
from speaker_adaptive.exceptions import ConfigError, DataError
from speaker_adaptive.training.config import TrainConfig

EFFECTIVE_CONFIG_FILE = "effective_config.json"


class EvaluationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    split_fractions: tuple[float, float, float] = DEFAULT_SPLIT_FRACTIONS
    split_seed: int = 0
    lambda_grid: list[float] = Field(
        default_factory=lambda: list(DEFAULT_LAMBDA_GRID), min_length=1
    )

    @field_validator("split_fractions")
    @classmethod
    def _fractions(
        cls, value: tuple[float, float, float]
    ) -> tuple[float, float, float]:
        try:
            return validate_fractions(value)
        except ConfigError as err:
            raise ValueError(str(err)) from err

    @field_validator("lambda_grid")
    @classmethod
    def _valid_grid(cls, value: list[float]) -> list[float]:
        if any(v < 0 for v in value):
            raise ValueError("lambda values must be non-negative")
        if len(set(value)) != len(value):
            raise ValueError("lambda values must be distinct")
        return value


class RunConfig(BaseModel):
    """Everything an experiment needs; persisted with every output directory."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    out_dir: Path = Path("runs")
    jobs: int = Field(default_factory=lambda: settings.DEFAULT_JOBS, ge=1)

    @field_validator("seeds")
    @classmethod
    def _distinct_seeds(cls, value: list[int]) -> list[int]:
        if len(set(value)) != len(value):
            raise ValueError("seeds must be distinct")
        return value

    def to_json(self) -> str:
        return self.model_dump_json(indent=2, by_alias=True)


def _key_path(error: Mapping[str, Any]) -> str:
    return ".".join(str(part) for part in error["loc"])


def validate_run_config(data: Mapping[str, Any]) -> RunConfig:
    """Validate raw configuration; the first problem is reported with its key path."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        first = err.errors()[0]
        raise ConfigError(first["msg"], key_path=_key_path(first)) from err


def load_run_config(path: Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as err:
        raise DataError(f"{path}: {err.strerror or err}") from err
    try:
        if path.suffix == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as err:
        raise ConfigError(f"{path}: {err}") from err
    return validate_run_config(data)


def with_overrides(config: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """Apply dotted-key overrides (e.g. `train.lambda`) and validate the result."""
    data = config.model_dump(mode="json", by_alias=True)
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = dotted.split(".")
        for part in parents:
            node = node[part]
        node[leaf] = value
    return validate_run_config(data)


def persist_effective_config(config: RunConfig, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    path = out_dir / EFFECTIVE_CONFIG_FILE
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(config.to_json() + "\n", encoding="utf-8")
    except OSError as err:
        raise DataError(f"{path}: {err.strerror or err}") from err
    return path
