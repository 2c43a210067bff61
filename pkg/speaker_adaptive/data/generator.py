"""
Synthetic dialogue corpora with speaker-specific affine distortion and modality dropout.

Every random draw comes from one seeded generator in a fixed order, so a configuration
and seed fix the corpus bit for bit.
"""

from typing import Any

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from speaker_adaptive.core.timing import log_timing
from speaker_adaptive.data.corpus import (
    Dialogue,
    DialogueCorpus,
    GenerativeTruth,
    SpeakerProfile,
    Utterance,
)
from speaker_adaptive.defaults import (
    DEFAULT_RELIABILITY,
    DEFAULT_SIGNATURE_SHARE,
    DEFAULT_SPEAKERS_PER_DIALOGUE,
    DEFAULT_STYLE_CYCLE,
    LONG_TAIL_RATIO,
    STYLE_RELIABILITY,
)
from speaker_adaptive.enums import ExpressiveStyle, PriorShape
from speaker_adaptive.exceptions import ConfigError

logger = structlog.getLogger(__name__)


class GeneratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    num_speakers: int = Field(default=6, gt=0)
    num_emotions: int = Field(default=4, gt=0)
    d_audio: int = Field(default=12, gt=0)
    d_visual: int = Field(default=12, gt=0)
    dialogues: int = Field(default=300, gt=0)
    utterances_per_dialogue: int = Field(default=10, gt=0)
    # defaults to min(2, num_speakers)
    speakers_per_dialogue: int = Field(default=DEFAULT_SPEAKERS_PER_DIALOGUE, gt=0)
    prior: PriorShape = PriorShape.UNIFORM
    # overrides `prior` when given; validated when the corpus is generated
    class_prior: list[float] | None = None
    heterogeneous: bool = True
    scale_range: tuple[float, float] = (0.5, 2.0)
    shift_sigma: float = Field(default=1.0, ge=0)
    style_cycle: list[ExpressiveStyle] = Field(
        default_factory=lambda: list(DEFAULT_STYLE_CYCLE), min_length=1
    )
    noise_sigma: float = Field(default=1.5, ge=0)
    uniform_reliability: float = Field(default=0.85, ge=0, le=1)
    signature_share: float = Field(default=DEFAULT_SIGNATURE_SHARE, ge=0, le=1)
    seed: int = 0

    @field_validator("scale_range")
    @classmethod
    def _ordered_positive(cls, value: tuple[float, float]) -> tuple[float, float]:
        low, high = value
        if low <= 0 or high < low:
            raise ValueError(f"scale_range must satisfy 0 < low <= high, got {value}")
        return value

    @model_validator(mode="before")
    @classmethod
    def _default_cast(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "speakers_per_dialogue" in data:
            return data
        num_speakers = data.get("num_speakers")
        if isinstance(num_speakers, int) and 0 < num_speakers:
            cast = min(DEFAULT_SPEAKERS_PER_DIALOGUE, num_speakers)
            return {**data, "speakers_per_dialogue": cast}
        return data

    @model_validator(mode="after")
    def _dialogue_cast(self) -> "GeneratorConfig":
        if self.speakers_per_dialogue > self.num_speakers:
            raise ValueError(
                f"speakers_per_dialogue ({self.speakers_per_dialogue}) exceeds "
                f"num_speakers ({self.num_speakers}); every dialogue draws its "
                "participants without replacement"
            )
        return self

    @property
    def modality_dims(self) -> dict[str, int]:
        return {"audio": self.d_audio, "visual": self.d_visual}

    def resolved_prior(self) -> np.ndarray:
        """The emotion class prior; an invalid explicit prior raises ConfigError."""
        if self.class_prior is not None:
            prior = np.asarray(self.class_prior, dtype=np.float64)
            if prior.shape != (self.num_emotions,):
                raise ConfigError(
                    f"class_prior has {prior.size} entries "
                    f"for {self.num_emotions} emotions",
                    key_path="generator.class_prior",
                )
            if np.any(prior < 0) or not np.isclose(prior.sum(), 1.0, rtol=0, atol=1e-9):
                raise ConfigError(
                    "class_prior must be non-negative and sum to 1",
                    key_path="generator.class_prior",
                )
            return prior / prior.sum()
        if self.prior == PriorShape.LONG_TAIL:
            weights = LONG_TAIL_RATIO ** np.arange(self.num_emotions, dtype=np.float64)
            return weights / weights.sum()
        return np.full(self.num_emotions, 1.0 / self.num_emotions)

    def speaker_prior(self, speaker_id: int, prior: np.ndarray) -> np.ndarray:
        """
        The class prior with `signature_share` of its mass moved onto emotion
        speaker_id mod E, so each speaker leans toward one emotion. Homogeneous
        corpora keep the plain prior for everyone.
        """
        if not self.heterogeneous or self.signature_share == 0.0:
            return prior
        signature = np.zeros(self.num_emotions)
        signature[speaker_id % self.num_emotions] = 1.0
        return (1.0 - self.signature_share) * prior + self.signature_share * signature


def _make_profiles(
    config: GeneratorConfig, prior: np.ndarray, rng: np.random.Generator
) -> list[SpeakerProfile]:
    low, high = np.log(config.scale_range[0]), np.log(config.scale_range[1])
    profiles = []
    for speaker_id in range(config.num_speakers):
        style = config.style_cycle[speaker_id % len(config.style_cycle)]
        scale, shift, reliability = {}, {}, {}
        for m, d_m in config.modality_dims.items():
            if config.heterogeneous:
                scale[m] = np.exp(rng.uniform(low, high, size=d_m)).tolist()
                shift[m] = rng.normal(0.0, config.shift_sigma, size=d_m).tolist()
                reliability[m] = STYLE_RELIABILITY[style].get(m, DEFAULT_RELIABILITY)
            else:
                scale[m] = [1.0] * d_m
                shift[m] = [0.0] * d_m
                reliability[m] = config.uniform_reliability
        profiles.append(
            SpeakerProfile(
                speaker_id=speaker_id,
                style=style,
                scale=scale,
                shift=shift,
                reliability=reliability,
                emotion_prior=config.speaker_prior(speaker_id, prior).tolist(),
            )
        )
    return profiles


@log_timing
def generate_corpus(
    config: GeneratorConfig,
) -> tuple[DialogueCorpus, list[SpeakerProfile]]:
    prior = config.resolved_prior()
    rng = np.random.default_rng(config.seed)
    dims = config.modality_dims
    sigma = config.noise_sigma

    prototypes = {
        m: rng.standard_normal((config.num_emotions, d_m)) for m, d_m in dims.items()
    }
    profiles = _make_profiles(config, prior, rng)
    emotion_priors = [np.asarray(p.emotion_prior) for p in profiles]
    scales = {m: [p.scale_array(m) for p in profiles] for m in dims}
    shifts = {m: [p.shift_array(m) for p in profiles] for m in dims}
    junk_spread = np.sqrt(1.0 + sigma**2)

    dialogues = []
    for dialogue_id in range(config.dialogues):
        participants = rng.choice(
            config.num_speakers, size=config.speakers_per_dialogue, replace=False
        )
        utterances = []
        for position in range(config.utterances_per_dialogue):
            speaker = int(participants[rng.integers(len(participants))])
            emotion = int(rng.choice(config.num_emotions, p=emotion_priors[speaker]))
            features = {}
            for m, d_m in dims.items():
                a, c = scales[m][speaker], shifts[m][speaker]
                clean = prototypes[m][emotion] + sigma * rng.standard_normal(d_m)
                observed = a * clean + c
                if rng.random() >= profiles[speaker].reliability[m]:
                    observed = c + a * junk_spread * rng.standard_normal(d_m)
                features[m] = observed
            utterances.append(
                Utterance(
                    speaker_id=speaker,
                    emotion=emotion,
                    features=features,
                    position=position,
                )
            )
        dialogues.append(Dialogue(dialogue_id, tuple(utterances)))

    truth = GenerativeTruth(
        profiles=profiles,
        prototypes={m: p.tolist() for m, p in prototypes.items()},
        noise_sigma=sigma,
        class_prior=prior.tolist(),
    )
    corpus = DialogueCorpus(
        dialogues=dialogues,
        modality_dims=dims,
        num_emotions=config.num_emotions,
        num_speakers=config.num_speakers,
        truth=truth,
    )
    logger.info(
        "Generated %s dialogues (%s utterances) for %s speakers",
        len(dialogues),
        corpus.num_utterances,
        config.num_speakers,
        heterogeneous=config.heterogeneous,
        seed=config.seed,
    )
    return corpus, profiles
