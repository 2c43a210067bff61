"""
The speaker-adaptive mechanism stack.

Each operation accepts either a single vector (one utterance) or a matrix whose rows
are utterances; the single-vector form is promoted to one row and squeezed back.
"""

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from speaker_adaptive.exceptions import ConfigError, ContractError, DimensionError
from speaker_adaptive.model.params import (
    EncoderBlock,
    FiLMParams,
    GateParams,
    Head,
    SpeakerEmbeddingTable,
)
from speaker_adaptive.tensor import (
    Tensor,
    add,
    concat,
    matmul,
    mul,
    relu,
    reshape,
    rms_normalize,
    scale,
    sigmoid,
    softmax_cross_entropy,
    take_rows,
)


def _as_rows(x: Tensor) -> tuple[Tensor, bool]:
    if x.ndim == 1:
        return reshape(x, (1, x.shape[0])), True
    if x.ndim == 2:
        return x, False
    raise DimensionError(f"Expected a vector or a matrix of rows, got {x.shape}")


def _restore(x: Tensor, squeeze: bool) -> Tensor:
    return reshape(x, (x.shape[1],)) if squeeze else x


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    rows, squeeze = _as_rows(x)
    if rows.shape[1] != w.shape[0]:
        raise DimensionError(f"Input width {rows.shape[1]} does not match {w.shape}")
    return _restore(add(matmul(rows, w), b), squeeze)


def embed_speaker(table: SpeakerEmbeddingTable, speaker_id: int) -> Tensor:
    """One speaker's embedding row; unseen ids resolve to the reserved row."""
    row = take_rows(table.rows, [table.row_index(speaker_id)])
    return reshape(row, (table.d_spk,))


def embed_speakers(table: SpeakerEmbeddingTable, speaker_ids: np.ndarray) -> Tensor:
    return take_rows(table.rows, table.row_indices(speaker_ids))


class FiLMOutput(NamedTuple):
    calibrated: Tensor
    gamma: Tensor
    beta: Tensor


def film_modulate(
    x: Tensor, e: Tensor, params: FiLMParams, modality: str
) -> FiLMOutput:
    """gamma = e W_gamma + b_gamma and beta = e W_beta + b_beta; gamma * x + beta."""
    block = params[modality]
    x_rows, squeeze = _as_rows(x)
    e_rows, _ = _as_rows(e)
    d_spk, d_m = block.w_gamma.shape
    if x_rows.shape[1] != d_m or e_rows.shape[1] != d_spk:
        raise DimensionError(
            f"FiLM[{modality}] expects features of width {d_m} and embeddings of "
            f"width {d_spk}, got {x.shape} and {e.shape}"
        )
    if x_rows.shape[0] != e_rows.shape[0]:
        raise DimensionError(
            f"{x_rows.shape[0]} feature rows but {e_rows.shape[0]} embedding rows"
        )
    gamma = add(matmul(e_rows, block.w_gamma), block.b_gamma)
    beta = add(matmul(e_rows, block.w_beta), block.b_beta)
    calibrated = add(mul(gamma, x_rows), beta)
    return FiLMOutput(
        calibrated=_restore(calibrated, squeeze),
        gamma=_restore(gamma, squeeze),
        beta=_restore(beta, squeeze),
    )


def context_matrix(dialogue_lengths: Sequence[int], window: int) -> np.ndarray:
    """
    Block-diagonal causal averaging matrix over a batch of whole dialogues.

    Row i holds 1/n over positions max(0, i-K)..i-1 of its own dialogue; it is all
    zeros at the first position and when K = 0.
    """
    if window < 0:
        raise ContractError(f"Context window must be non-negative, got {window}")
    total = int(sum(dialogue_lengths))
    matrix = np.zeros((total, total))
    offset = 0
    for length in dialogue_lengths:
        for i in range(length):
            start = max(0, i - window)
            if i > start:
                matrix[offset + i, offset + start : offset + i] = 1.0 / (i - start)
        offset += length
    return matrix


def _encode(normalized: Tensor, context: Tensor, block: EncoderBlock) -> Tensor:
    if block.w.shape[0] != 2 * normalized.shape[1]:
        raise DimensionError(
            f"Encoder expects {block.w.shape[0] // 2}-wide features, "
            f"got {normalized.shape[1]}"
        )
    return relu(add(matmul(concat([normalized, context]), block.w), block.b))


def context_encode(
    calibrated: Tensor, position: int, window: int, block: EncoderBlock
) -> Tensor:
    """
    Context feature of one utterance from the calibrated features of its dialogue
    (rows in dialogue order). Reads positions <= `position` only.

    Every calibrated row is scaled to unit root mean square before the window mean
    and the affine map, so the encoder sees the pattern FiLM leaves across a
    modality's dimensions but not its overall magnitude. Weighting a whole modality
    up or down per speaker is left to the gate.
    """
    if calibrated.ndim != 2:
        raise DimensionError(f"Expected dialogue rows, got {calibrated.shape}")
    length = calibrated.shape[0]
    if not 0 <= position < length:
        raise IndexError(f"Position {position} outside dialogue of length {length}")
    normalized = rms_normalize(calibrated)
    row = context_matrix([length], window)[position : position + 1]
    context = matmul(Tensor(row), normalized)
    current = take_rows(normalized, [position])
    return reshape(_encode(current, context, block), (block.w.shape[1],))


def context_encode_batch(
    calibrated: Tensor, context: np.ndarray, block: EncoderBlock
) -> Tensor:
    """All positions at once; `context` comes from `context_matrix`."""
    normalized = rms_normalize(calibrated)
    return _encode(normalized, matmul(Tensor(context), normalized), block)


class GateOutput(NamedTuple):
    gated: Tensor
    gate: Tensor


def speaker_gate_modulate(
    h: Tensor,
    e: Tensor,
    params: GateParams,
    modality: str,
    *,
    bypass: bool = False,
) -> GateOutput:
    """g = sigmoid(e W_gate + b_gate); returns (g * h, g). `bypass` pins g to 1."""
    block = params[modality]
    h_rows, squeeze = _as_rows(h)
    e_rows, _ = _as_rows(e)
    d_spk, d_h = block.w.shape
    if h_rows.shape[1] != d_h or e_rows.shape[1] != d_spk:
        raise DimensionError(
            f"Gate[{modality}] expects context width {d_h} and embedding width "
            f"{d_spk}, got {h.shape} and {e.shape}"
        )
    if bypass:
        gate = Tensor(np.ones(h_rows.shape))
        return GateOutput(gated=h, gate=_restore(gate, squeeze))
    gate = sigmoid(add(matmul(e_rows, block.w), block.b))
    gated = mul(gate, h_rows)
    return GateOutput(gated=_restore(gated, squeeze), gate=_restore(gate, squeeze))


class FusionOutput(NamedTuple):
    logits: Tensor
    fused: Tensor


def fuse_and_classify(
    gated: Mapping[str, Tensor], head: Head, modalities: Sequence[str]
) -> FusionOutput:
    """Gated modality features concatenated in configuration order, then classified."""
    missing = [m for m in modalities if m not in gated]
    if missing:
        raise ContractError(f"Missing modality features: {missing}")
    fused = concat([gated[m] for m in modalities])
    if fused.shape[-1] != head.w.shape[0]:
        raise DimensionError(
            f"Fused width {fused.shape[-1]} does not match head {head.w.shape}"
        )
    return FusionOutput(logits=affine(fused, head.w, head.b), fused=fused)


def speaker_head(fused: Tensor, head: Head) -> Tensor:
    if fused.shape[-1] != head.w.shape[0]:
        raise DimensionError(
            f"Fused width {fused.shape[-1]} does not match speaker head {head.w.shape}"
        )
    return affine(fused, head.w, head.b)


@dataclass
class LossBreakdown:
    l_erc: Tensor
    l_spk: Tensor
    lambda_spk: float
    total: Tensor

    def as_floats(self) -> dict[str, float]:
        return {
            "l_erc": self.l_erc.item(),
            "l_spk": self.l_spk.item(),
            "lambda": self.lambda_spk,
            "total": self.total.item(),
        }


def total_loss(
    emotion_logits: Tensor,
    emotion_targets: Sequence[int] | np.ndarray | int,
    speaker_logits: Tensor,
    speaker_targets: Sequence[int] | np.ndarray | int,
    lambda_spk: float,
    class_weights: np.ndarray | None = None,
) -> LossBreakdown:
    """L_total = L_ERC + lambda * L_SPK, both softmax cross-entropy."""
    if lambda_spk < 0:
        raise ConfigError(f"lambda must be non-negative, got {lambda_spk}")
    emotion_rows, _ = _as_rows(emotion_logits)
    speaker_rows, _ = _as_rows(speaker_logits)
    l_erc = softmax_cross_entropy(
        emotion_rows, np.atleast_1d(emotion_targets), class_weights
    )
    l_spk = softmax_cross_entropy(speaker_rows, np.atleast_1d(speaker_targets))
    total = add(l_erc, scale(l_spk, lambda_spk))
    return LossBreakdown(l_erc=l_erc, l_spk=l_spk, lambda_spk=lambda_spk, total=total)
