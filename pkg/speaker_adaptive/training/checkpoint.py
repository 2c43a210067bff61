"""
Checkpoints as numpy `.npz` archives.

Arrays are stored under `param/<name>`, `best/<name>`, `adam_m/<name>` and
`adam_v/<name>`; `__meta__` holds the UTF-8 JSON header (version, configurations,
shapes, counters, RNG state and the training curve) as a uint8 array.
"""

import json
import os
import tempfile
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, ValidationError

from speaker_adaptive.defaults import CHECKPOINT_VERSION
from speaker_adaptive.exceptions import CheckpointError
from speaker_adaptive.model.params import ModelConfig, ModelParameters
from speaker_adaptive.training.config import TrainConfig
from speaker_adaptive.training.optim import AdamState

logger = structlog.getLogger(__name__)

META_KEY = "__meta__"
_GROUPS = ("param", "best", "adam_m", "adam_v")


class EpochRecord(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    epoch: int
    train_loss: float
    train_l_erc: float
    train_l_spk: float
    val_weighted_f1: float


class CheckpointMeta(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: str
    train: TrainConfig
    model: ModelConfig
    census: int
    shapes: dict[str, list[int]]
    epoch: int
    adam_step: int
    rng_state: dict[str, Any]
    best_val_weighted_f1: float | None
    best_epoch: int | None
    epochs_without_improvement: int
    stopped_early: bool
    curve: list[EpochRecord]


@dataclass
class Checkpoint:
    train_config: TrainConfig
    model_config: ModelConfig
    params: ModelParameters
    best_params: ModelParameters
    adam: AdamState
    # completed epochs
    epoch: int
    rng_state: dict[str, Any]
    best_val_weighted_f1: float | None = None
    best_epoch: int | None = None
    epochs_without_improvement: int = 0
    stopped_early: bool = False
    curve: list[EpochRecord] = field(default_factory=list)

    def equals(self, other: "Checkpoint") -> bool:
        return (
            self.train_config == other.train_config
            and self.model_config == other.model_config
            and self.params.equals(other.params)
            and self.best_params.equals(other.best_params)
            and self.adam.equals(other.adam)
            and self.epoch == other.epoch
            and self.rng_state == other.rng_state
            and self.best_val_weighted_f1 == other.best_val_weighted_f1
            and self.best_epoch == other.best_epoch
            and self.epochs_without_improvement == other.epochs_without_improvement
            and self.stopped_early == other.stopped_early
            and self.curve == other.curve
        )


def _meta(checkpoint: Checkpoint) -> CheckpointMeta:
    return CheckpointMeta(
        version=CHECKPOINT_VERSION,
        train=checkpoint.train_config,
        model=checkpoint.model_config,
        census=checkpoint.params.census(),
        shapes={name: list(t.shape) for name, t in checkpoint.params.items()},
        epoch=checkpoint.epoch,
        adam_step=checkpoint.adam.step,
        rng_state=checkpoint.rng_state,
        best_val_weighted_f1=checkpoint.best_val_weighted_f1,
        best_epoch=checkpoint.best_epoch,
        epochs_without_improvement=checkpoint.epochs_without_improvement,
        stopped_early=checkpoint.stopped_early,
        curve=checkpoint.curve,
    )


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> Path:
    """Write atomically: a temporary file in the target directory replaces `path`."""
    path = Path(path)
    # stdlib json keeps the 128-bit generator state integers exact
    meta = _meta(checkpoint).model_dump(mode="json", by_alias=True)
    header = json.dumps(meta).encode("utf-8")
    arrays: dict[str, np.ndarray] = {META_KEY: np.frombuffer(header, dtype=np.uint8)}
    for name, tensor in checkpoint.params.items():
        arrays[f"param/{name}"] = tensor.data
        arrays[f"best/{name}"] = checkpoint.best_params[name].data
        arrays[f"adam_m/{name}"] = checkpoint.adam.m[name]
        arrays[f"adam_v/{name}"] = checkpoint.adam.v[name]

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as handle:
                np.savez(handle, **arrays)
            os.replace(tmp_name, path)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise
    except OSError as err:
        raise CheckpointError(f"{path}: {err.strerror or err}") from err
    logger.debug("Saved checkpoint at epoch %s to %s", checkpoint.epoch, path)
    return path


def _read_archive(path: Path) -> tuple[CheckpointMeta, dict[str, np.ndarray]]:
    try:
        with np.load(path, allow_pickle=False) as archive:
            raw = {key: archive[key] for key in archive.files}
        header = raw.pop(META_KEY)
        meta = CheckpointMeta.model_validate(
            json.loads(header.tobytes().decode("utf-8"))
        )
    except (
        zipfile.BadZipFile,
        OSError,
        ValueError,
        EOFError,
        KeyError,
        ValidationError,
    ) as err:
        raise CheckpointError(f"{path}: unreadable checkpoint ({err})") from err
    return meta, raw


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    meta, raw = _read_archive(path)
    if meta.version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: version {meta.version!r}, expected {CHECKPOINT_VERSION!r}"
        )
    expected = {
        name: list(shape) for name, shape in meta.model.expected_shapes().items()
    }
    if meta.shapes != expected or meta.census != meta.model.census():
        raise CheckpointError(
            f"{path}: parameter census does not match the configuration"
        )

    groups: dict[str, dict[str, np.ndarray]] = {g: {} for g in _GROUPS}
    for key, value in raw.items():
        group, _, name = key.partition("/")
        if group not in groups or name not in expected:
            raise CheckpointError(f"{path}: unexpected array {key!r}")
        if list(value.shape) != expected[name] or value.dtype != np.float64:
            raise CheckpointError(
                f"{path}: {key} has shape {value.shape} {value.dtype}"
            )
        groups[group][name] = value
    for group, arrays in groups.items():
        missing = set(expected) - set(arrays)
        if missing:
            raise CheckpointError(f"{path}: missing {group} arrays {sorted(missing)}")

    checkpoint = Checkpoint(
        train_config=meta.train,
        model_config=meta.model,
        params=ModelParameters.from_arrays(meta.model, groups["param"]),
        best_params=ModelParameters.from_arrays(meta.model, groups["best"]),
        adam=AdamState(
            m={n: groups["adam_m"][n] for n in expected},
            v={n: groups["adam_v"][n] for n in expected},
            step=meta.adam_step,
        ),
        epoch=meta.epoch,
        rng_state=meta.rng_state,
        best_val_weighted_f1=meta.best_val_weighted_f1,
        best_epoch=meta.best_epoch,
        epochs_without_improvement=meta.epochs_without_improvement,
        stopped_early=meta.stopped_early,
        curve=meta.curve,
    )
    logger.debug("Loaded checkpoint at epoch %s from %s", checkpoint.epoch, path)
    return checkpoint
