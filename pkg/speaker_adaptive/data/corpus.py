from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from speaker_adaptive.enums import ExpressiveStyle
from speaker_adaptive.exceptions import DataError


class SpeakerProfile(BaseModel):
    """How one synthetic speaker distorts and drops each modality."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    speaker_id: int = Field(ge=0)
    style: ExpressiveStyle
    scale: dict[str, list[float]]
    shift: dict[str, list[float]]
    reliability: dict[str, float]
    # the speaker's own emotion distribution; None means the corpus class prior
    emotion_prior: list[float] | None = None

    @field_validator("scale")
    @classmethod
    def _positive_scale(cls, value: dict[str, list[float]]) -> dict[str, list[float]]:
        for modality, scale in value.items():
            if any(s <= 0 for s in scale):
                raise ValueError(f"Scale of modality {modality!r} must be positive")
        return value

    @field_validator("reliability")
    @classmethod
    def _probability(cls, value: dict[str, float]) -> dict[str, float]:
        for modality, r in value.items():
            if not 0.0 <= r <= 1.0:
                raise ValueError(
                    f"Reliability of {modality!r} must be in [0, 1], got {r}"
                )
        return value

    @field_validator("emotion_prior")
    @classmethod
    def _distribution(cls, value: list[float] | None) -> list[float] | None:
        if value is not None and (
            any(p < 0 for p in value) or not np.isclose(sum(value), 1.0, atol=1e-9)
        ):
            raise ValueError("emotion_prior must be non-negative and sum to 1")
        return value

    @model_validator(mode="after")
    def _same_modalities(self) -> "SpeakerProfile":
        if not (set(self.scale) == set(self.shift) == set(self.reliability)):
            raise ValueError(
                "scale, shift and reliability must cover the same modalities"
            )
        for m in self.scale:
            if len(self.scale[m]) != len(self.shift[m]):
                raise ValueError(f"scale and shift of {m!r} differ in width")
        return self

    def scale_array(self, modality: str) -> np.ndarray:
        return np.asarray(self.scale[modality], dtype=np.float64)

    def shift_array(self, modality: str) -> np.ndarray:
        return np.asarray(self.shift[modality], dtype=np.float64)


class GenerativeTruth(BaseModel):
    """Everything the Bayes oracle needs to score a synthetic corpus."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    profiles: list[SpeakerProfile]
    # modality -> emotions x width
    prototypes: dict[str, list[list[float]]]
    noise_sigma: float = Field(ge=0)
    class_prior: list[float]

    def prototype_array(self, modality: str) -> np.ndarray:
        return np.asarray(self.prototypes[modality], dtype=np.float64)

    def profile(self, speaker_id: int) -> SpeakerProfile:
        for profile in self.profiles:
            if profile.speaker_id == speaker_id:
                return profile
        raise KeyError(speaker_id)

    def emotion_prior(self, speaker_id: int) -> np.ndarray:
        own = self.profile(speaker_id).emotion_prior
        return np.asarray(own if own is not None else self.class_prior)


@dataclass(frozen=True, eq=False)
class Utterance:
    speaker_id: int
    emotion: int
    features: dict[str, np.ndarray]
    position: int


@dataclass(frozen=True, eq=False)
class Dialogue:
    dialogue_id: int
    utterances: tuple[Utterance, ...]

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self) -> Iterator[Utterance]:
        return iter(self.utterances)


@dataclass(eq=False)
class DialogueCorpus:
    """
    Dialogues of utterances with per-modality features.

    Speakers are registered as 0..num_speakers-1 and emotions as 0..num_emotions-1.
    `truth` is only present for generated corpora.
    """

    dialogues: list[Dialogue]
    modality_dims: dict[str, int]
    num_emotions: int
    num_speakers: int
    truth: GenerativeTruth | None = field(default=None)

    def __post_init__(self) -> None:
        if self.num_emotions <= 0 or self.num_speakers <= 0:
            raise DataError("A corpus needs at least one emotion and one speaker")
        seen: set[int] = set()
        for dialogue in self.dialogues:
            if dialogue.dialogue_id in seen:
                raise DataError(f"Duplicate dialogue id {dialogue.dialogue_id}")
            seen.add(dialogue.dialogue_id)
            if not dialogue.utterances:
                raise DataError(f"Dialogue {dialogue.dialogue_id} has no utterances")
            for position, utterance in enumerate(dialogue.utterances):
                self._check_utterance(dialogue.dialogue_id, position, utterance)

    def _check_utterance(self, dialogue_id: int, position: int, utt: Utterance) -> None:
        where = f"dialogue {dialogue_id} utterance {position}"
        if utt.position != position:
            raise DataError(f"{where}: recorded position {utt.position}")
        if not 0 <= utt.emotion < self.num_emotions:
            raise DataError(
                f"{where}: emotion {utt.emotion} outside [0, {self.num_emotions})"
            )
        if not 0 <= utt.speaker_id < self.num_speakers:
            raise DataError(f"{where}: unregistered speaker {utt.speaker_id}")
        if set(utt.features) != set(self.modality_dims):
            raise DataError(f"{where}: modalities {sorted(utt.features)}")
        for m, width in self.modality_dims.items():
            if utt.features[m].shape != (width,):
                raise DataError(
                    f"{where}: {m} features of shape {utt.features[m].shape}, "
                    f"expected ({width},)"
                )

    @property
    def modalities(self) -> list[str]:
        return list(self.modality_dims)

    @property
    def is_synthetic(self) -> bool:
        return self.truth is not None

    def __len__(self) -> int:
        return len(self.dialogues)

    @property
    def num_utterances(self) -> int:
        return sum(len(d) for d in self.dialogues)

    def utterances(self) -> Iterator[Utterance]:
        for dialogue in self.dialogues:
            yield from dialogue.utterances

    def labels(self) -> np.ndarray:
        return np.array([u.emotion for u in self.utterances()], dtype=np.int64)

    def speaker_ids(self) -> np.ndarray:
        return np.array([u.speaker_id for u in self.utterances()], dtype=np.int64)

    def features(self, modality: str) -> np.ndarray:
        if not self.dialogues:
            return np.zeros((0, self.modality_dims[modality]))
        return np.stack([u.features[modality] for u in self.utterances()])

    def speakers_present(self) -> set[int]:
        return {u.speaker_id for u in self.utterances()}

    def subset(self, indices: Sequence[int]) -> "DialogueCorpus":
        """Dialogues at the given positions, in the given order, sharing metadata."""
        return DialogueCorpus(
            dialogues=[self.dialogues[i] for i in indices],
            modality_dims=dict(self.modality_dims),
            num_emotions=self.num_emotions,
            num_speakers=self.num_speakers,
            truth=self.truth,
        )

    def content_equal(self, other: "DialogueCorpus") -> bool:
        """Same metadata and bit-identical utterances (the truth record is ignored)."""
        if (
            self.modality_dims != other.modality_dims
            or self.num_emotions != other.num_emotions
            or self.num_speakers != other.num_speakers
            or len(self.dialogues) != len(other.dialogues)
        ):
            return False
        for mine, theirs in zip(self.dialogues, other.dialogues):
            if mine.dialogue_id != theirs.dialogue_id or len(mine) != len(theirs):
                return False
            for a, b in zip(mine, theirs):
                if (a.speaker_id, a.emotion, a.position) != (
                    b.speaker_id,
                    b.emotion,
                    b.position,
                ):
                    return False
                if any(
                    not np.array_equal(a.features[m], b.features[m]) for m in a.features
                ):
                    return False
        return True
