from collections.abc import Iterator, Mapping
from dataclasses import dataclass

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator

from speaker_adaptive.defaults import DEFAULT_MODALITY_DIMS
from speaker_adaptive.exceptions import ContractError, DimensionError
from speaker_adaptive.tensor import Tensor

logger = structlog.getLogger(__name__)


class ArchitectureConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    d_spk: int = Field(default=16, gt=0)
    d_h: int = Field(default=32, gt=0)
    window: int = Field(default=4, ge=0)
    gate_bias_init: float = 2.0


class ModelConfig(BaseModel):
    """Architecture plus the corpus-dependent dimensions."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    num_speakers: int = Field(gt=0)
    num_emotions: int = Field(gt=0)
    modality_dims: dict[str, int] = Field(
        default_factory=lambda: dict(DEFAULT_MODALITY_DIMS)
    )
    d_spk: int = Field(default=16, gt=0)
    d_h: int = Field(default=32, gt=0)
    window: int = Field(default=4, ge=0)
    gate_bias_init: float = 2.0

    @field_validator("modality_dims")
    @classmethod
    def _validate_dims(cls, value: dict[str, int]) -> dict[str, int]:
        if not value:
            raise ValueError("at least one modality is required")
        for name, dim in value.items():
            if dim <= 0:
                raise ValueError(f"modality {name!r} needs a positive width")
        return value

    @classmethod
    def build(
        cls,
        *,
        num_speakers: int,
        num_emotions: int,
        modality_dims: Mapping[str, int],
        architecture: ArchitectureConfig,
    ) -> "ModelConfig":
        return cls(
            num_speakers=num_speakers,
            num_emotions=num_emotions,
            modality_dims=dict(modality_dims),
            **architecture.model_dump(),
        )

    @property
    def modalities(self) -> list[str]:
        return list(self.modality_dims)

    @property
    def fused_dim(self) -> int:
        return len(self.modality_dims) * self.d_h

    def census(self) -> int:
        """Closed-form count of every learned scalar."""
        s, e, d_spk, d_h = self.num_speakers, self.num_emotions, self.d_spk, self.d_h
        total = (s + 1) * d_spk
        for d_m in self.modality_dims.values():
            total += 2 * (d_spk * d_m + d_m)  # FiLM gamma / beta
            total += 2 * d_m * d_h + d_h  # context encoder
            total += d_spk * d_h + d_h  # gate
        total += self.fused_dim * e + e
        total += self.fused_dim * s + s
        return total

    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {
            "speaker_embedding": (self.num_speakers + 1, self.d_spk)
        }
        for m, d_m in self.modality_dims.items():
            shapes[f"film.{m}.w_gamma"] = (self.d_spk, d_m)
            shapes[f"film.{m}.b_gamma"] = (d_m,)
            shapes[f"film.{m}.w_beta"] = (self.d_spk, d_m)
            shapes[f"film.{m}.b_beta"] = (d_m,)
            shapes[f"encoder.{m}.w"] = (2 * d_m, self.d_h)
            shapes[f"encoder.{m}.b"] = (self.d_h,)
            shapes[f"gate.{m}.w"] = (self.d_spk, self.d_h)
            shapes[f"gate.{m}.b"] = (self.d_h,)
        shapes["emotion_head.w"] = (self.fused_dim, self.num_emotions)
        shapes["emotion_head.b"] = (self.num_emotions,)
        shapes["speaker_head.w"] = (self.fused_dim, self.num_speakers)
        shapes["speaker_head.b"] = (self.num_speakers,)
        return shapes


@dataclass
class SpeakerEmbeddingTable:
    rows: Tensor
    num_speakers: int

    @property
    def oov_index(self) -> int:
        return self.num_speakers

    @property
    def d_spk(self) -> int:
        return self.rows.shape[1]

    def row_index(self, speaker_id: int) -> int:
        if speaker_id < 0:
            raise IndexError(f"Speaker id must be non-negative, got {speaker_id}")
        return speaker_id if speaker_id < self.num_speakers else self.oov_index

    def row_indices(self, speaker_ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(speaker_ids, dtype=np.int64)
        if ids.size and ids.min() < 0:
            raise IndexError(f"Speaker ids must be non-negative, got {ids.min()}")
        return np.where(ids < self.num_speakers, ids, self.oov_index)


@dataclass
class FiLMBlock:
    w_gamma: Tensor
    b_gamma: Tensor
    w_beta: Tensor
    b_beta: Tensor


@dataclass
class FiLMParams:
    blocks: dict[str, FiLMBlock]

    def __getitem__(self, modality: str) -> FiLMBlock:
        try:
            return self.blocks[modality]
        except KeyError:
            raise ContractError(f"No FiLM parameters for modality {modality!r}")


@dataclass
class GateBlock:
    w: Tensor
    b: Tensor


@dataclass
class GateParams:
    blocks: dict[str, GateBlock]

    def __getitem__(self, modality: str) -> GateBlock:
        try:
            return self.blocks[modality]
        except KeyError:
            raise ContractError(f"No gate parameters for modality {modality!r}")


@dataclass
class EncoderBlock:
    w: Tensor
    b: Tensor


@dataclass
class Head:
    w: Tensor
    b: Tensor


class ModelParameters(Mapping[str, Tensor]):
    """
    Every learned array, addressable by a stable dotted name.

    Iteration order is fixed by the configuration, so optimizer state, checkpoints and
    gradient checks all walk the parameters in the same order.
    """

    def __init__(self, config: ModelConfig, tensors: Mapping[str, Tensor]) -> None:
        expected = config.expected_shapes()
        if list(tensors) != list(expected):
            missing = set(expected) - set(tensors)
            extra = set(tensors) - set(expected)
            raise ContractError(
                f"Parameter names do not match the configuration "
                f"(missing={sorted(missing)}, unexpected={sorted(extra)})"
            )
        for name, shape in expected.items():
            if tensors[name].shape != shape:
                raise DimensionError(
                    f"{name} has shape {tensors[name].shape}, expected {shape}"
                )
        self.config = config
        self._tensors = dict(tensors)

        self.embedding = SpeakerEmbeddingTable(
            rows=self._tensors["speaker_embedding"], num_speakers=config.num_speakers
        )
        self.film = FiLMParams(
            blocks={
                m: FiLMBlock(
                    w_gamma=self._tensors[f"film.{m}.w_gamma"],
                    b_gamma=self._tensors[f"film.{m}.b_gamma"],
                    w_beta=self._tensors[f"film.{m}.w_beta"],
                    b_beta=self._tensors[f"film.{m}.b_beta"],
                )
                for m in config.modalities
            }
        )
        self.encoders = {
            m: EncoderBlock(
                w=self._tensors[f"encoder.{m}.w"], b=self._tensors[f"encoder.{m}.b"]
            )
            for m in config.modalities
        }
        self.gates = GateParams(
            blocks={
                m: GateBlock(
                    w=self._tensors[f"gate.{m}.w"], b=self._tensors[f"gate.{m}.b"]
                )
                for m in config.modalities
            }
        )
        self.emotion_head = Head(
            w=self._tensors["emotion_head.w"], b=self._tensors["emotion_head.b"]
        )
        self.speaker_head = Head(
            w=self._tensors["speaker_head.w"], b=self._tensors["speaker_head.b"]
        )

    @classmethod
    def from_arrays(
        cls, config: ModelConfig, arrays: Mapping[str, np.ndarray]
    ) -> "ModelParameters":
        names = list(config.expected_shapes())
        missing = [n for n in names if n not in arrays]
        if missing:
            raise ContractError(f"Missing parameter arrays: {missing}")
        return cls(
            config,
            {
                name: Tensor(arrays[name], requires_grad=True, name=name)
                for name in names
            },
        )

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def census(self, names: set[str] | frozenset[str] | None = None) -> int:
        return sum(
            t.size for n, t in self._tensors.items() if names is None or n in names
        )

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.zero_grad()

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def grads(self) -> dict[str, np.ndarray]:
        return {
            name: t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
            for name, t in self._tensors.items()
        }

    def assign(self, arrays: Mapping[str, np.ndarray]) -> None:
        """Overwrite parameter values in place (tensors keep their identity)."""
        for name, value in arrays.items():
            tensor = self._tensors[name]
            if value.shape != tensor.shape:
                raise DimensionError(
                    f"Cannot assign shape {value.shape} to {name} {tensor.shape}"
                )
            tensor.data = np.array(value, dtype=np.float64, copy=True)

    def copy(self) -> "ModelParameters":
        return ModelParameters.from_arrays(self.config, self.arrays())

    def equals(self, other: "ModelParameters") -> bool:
        return self.config == other.config and all(
            np.array_equal(self[name].data, other[name].data) for name in self
        )


def _uniform(
    rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]
) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_model(config: ModelConfig, seed: int) -> ModelParameters:
    """
    Deterministic initialization:

    - speaker rows uniform in (-1, 1); the reserved out-of-vocabulary row is their mean
    - FiLM starts at the identity (zero weights, gamma bias 1, beta bias 0)
    - gate bias at `gate_bias_init` so gates start near pass-through
    - every other weight and bias uniform in +-1/sqrt(fan_in)
    """
    rng = np.random.default_rng(seed)
    s, d_spk, d_h = config.num_speakers, config.d_spk, config.d_h
    arrays: dict[str, np.ndarray] = {}

    speaker_rows = _uniform(rng, 1, (s, d_spk))
    arrays["speaker_embedding"] = np.vstack(
        [speaker_rows, speaker_rows.mean(axis=0, keepdims=True)]
    )
    for m, d_m in config.modality_dims.items():
        arrays[f"film.{m}.w_gamma"] = np.zeros((d_spk, d_m))
        arrays[f"film.{m}.b_gamma"] = np.ones(d_m)
        arrays[f"film.{m}.w_beta"] = np.zeros((d_spk, d_m))
        arrays[f"film.{m}.b_beta"] = np.zeros(d_m)
        arrays[f"encoder.{m}.w"] = _uniform(rng, 2 * d_m, (2 * d_m, d_h))
        arrays[f"encoder.{m}.b"] = _uniform(rng, 2 * d_m, (d_h,))
        arrays[f"gate.{m}.w"] = _uniform(rng, d_spk, (d_spk, d_h))
        arrays[f"gate.{m}.b"] = np.full(d_h, config.gate_bias_init)
    fused = config.fused_dim
    arrays["emotion_head.w"] = _uniform(rng, fused, (fused, config.num_emotions))
    arrays["emotion_head.b"] = _uniform(rng, fused, (config.num_emotions,))
    arrays["speaker_head.w"] = _uniform(rng, fused, (fused, s))
    arrays["speaker_head.b"] = _uniform(rng, fused, (s,))

    params = ModelParameters.from_arrays(config, arrays)
    logger.debug(
        "Initialized model with %s parameters (seed=%s)", params.census(), seed
    )
    return params


def permute_speakers(
    params: ModelParameters, permutation: np.ndarray
) -> ModelParameters:
    """Relabel speaker i as permutation[i] in the embedding table and speaker head."""
    perm = np.asarray(permutation, dtype=np.int64)
    s = params.config.num_speakers
    if sorted(perm.tolist()) != list(range(s)):
        raise ContractError(f"Not a permutation of {s} speakers: {perm.tolist()}")
    arrays = params.arrays()
    table = arrays["speaker_embedding"].copy()
    table[perm] = arrays["speaker_embedding"][:s]
    arrays["speaker_embedding"] = table
    head_w = np.empty_like(arrays["speaker_head.w"])
    head_w[:, perm] = arrays["speaker_head.w"]
    head_b = np.empty_like(arrays["speaker_head.b"])
    head_b[perm] = arrays["speaker_head.b"]
    arrays["speaker_head.w"] = head_w
    arrays["speaker_head.b"] = head_b
    return ModelParameters.from_arrays(params.config, arrays)
