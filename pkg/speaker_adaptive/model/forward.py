from dataclasses import dataclass
from typing import Sequence

import numpy as np

from speaker_adaptive.data.corpus import Dialogue
from speaker_adaptive.enums import Ablation
from speaker_adaptive.exceptions import ContractError
from speaker_adaptive.model.layers import (
    LossBreakdown,
    context_encode_batch,
    context_matrix,
    embed_speakers,
    film_modulate,
    fuse_and_classify,
    speaker_gate_modulate,
    speaker_head,
    total_loss,
)
from speaker_adaptive.model.params import ModelParameters
from speaker_adaptive.tensor import Tensor, detach


@dataclass(frozen=True)
class Batch:
    """Whole dialogues stacked row-wise, so the causal context never leaves a batch."""

    features: dict[str, np.ndarray]
    speaker_ids: np.ndarray
    embedding_ids: np.ndarray
    emotions: np.ndarray
    context: np.ndarray
    dialogue_lengths: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(self.emotions.shape[0])


def make_batch(
    dialogues: Sequence[Dialogue],
    modalities: Sequence[str],
    window: int,
    *,
    num_speakers: int,
    oov_mask: np.ndarray | None = None,
) -> Batch:
    """
    `oov_mask` marks utterances whose speaker is looked up through the reserved
    out-of-vocabulary row (the speaker target stays the true id).
    """
    if not dialogues:
        raise ContractError("A batch needs at least one dialogue")
    utterances = [u for d in dialogues for u in d.utterances]
    speaker_ids = np.array([u.speaker_id for u in utterances], dtype=np.int64)
    embedding_ids = speaker_ids.copy()
    if oov_mask is not None:
        if oov_mask.shape != speaker_ids.shape:
            raise ContractError(
                f"OOV mask of shape {oov_mask.shape} for {speaker_ids.size} utterances"
            )
        embedding_ids[oov_mask] = num_speakers
    return Batch(
        features={
            m: np.stack([u.features[m] for u in utterances]) for m in modalities
        },
        speaker_ids=speaker_ids,
        embedding_ids=embedding_ids,
        emotions=np.array([u.emotion for u in utterances], dtype=np.int64),
        context=context_matrix([len(d) for d in dialogues], window),
        dialogue_lengths=tuple(len(d) for d in dialogues),
    )


@dataclass
class ForwardOutput:
    emotion_logits: Tensor
    speaker_logits: Tensor
    fused: Tensor
    gates: dict[str, Tensor]
    gammas: dict[str, Tensor]
    betas: dict[str, Tensor]


def forward(
    params: ModelParameters, batch: Batch, ablation: Ablation = Ablation.FULL
) -> ForwardOutput:
    config = params.config
    e = embed_speakers(params.embedding, batch.embedding_ids)
    gated: dict[str, Tensor] = {}
    gates: dict[str, Tensor] = {}
    gammas: dict[str, Tensor] = {}
    betas: dict[str, Tensor] = {}
    for m in config.modalities:
        film = film_modulate(Tensor(batch.features[m]), e, params.film, m)
        h = context_encode_batch(film.calibrated, batch.context, params.encoders[m])
        gate = speaker_gate_modulate(
            h, e, params.gates, m, bypass=ablation == Ablation.NO_GATE
        )
        gated[m] = gate.gated
        gates[m] = gate.gate
        gammas[m] = film.gamma
        betas[m] = film.beta

    emotion = fuse_and_classify(gated, params.emotion_head, config.modalities)
    if ablation == Ablation.NO_AUX:
        head = params.speaker_head
        speaker_logits = speaker_head(
            detach(emotion.fused), type(head)(w=detach(head.w), b=detach(head.b))
        )
    else:
        speaker_logits = speaker_head(emotion.fused, params.speaker_head)
    return ForwardOutput(
        emotion_logits=emotion.logits,
        speaker_logits=speaker_logits,
        fused=emotion.fused,
        gates=gates,
        gammas=gammas,
        betas=betas,
    )


def effective_lambda(lambda_spk: float, ablation: Ablation) -> float:
    return 0.0 if ablation == Ablation.NO_AUX else lambda_spk


def compute_loss(
    params: ModelParameters,
    batch: Batch,
    lambda_spk: float,
    ablation: Ablation = Ablation.FULL,
    class_weights: np.ndarray | None = None,
) -> tuple[ForwardOutput, LossBreakdown]:
    output = forward(params, batch, ablation)
    losses = total_loss(
        output.emotion_logits,
        batch.emotions,
        output.speaker_logits,
        batch.speaker_ids,
        effective_lambda(lambda_spk, ablation),
        class_weights,
    )
    return output, losses
