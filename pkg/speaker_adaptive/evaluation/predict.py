from dataclasses import dataclass, field

import numpy as np

from speaker_adaptive.data.corpus import DialogueCorpus
from speaker_adaptive.enums import Ablation
from speaker_adaptive.evaluation.metrics import ConfusionMatrix, confusion_matrix
from speaker_adaptive.exceptions import ContractError
from speaker_adaptive.model.forward import forward, make_batch
from speaker_adaptive.model.params import ModelParameters
from speaker_adaptive.tensor import softmax


@dataclass
class Predictions:
    predictions: np.ndarray
    probabilities: np.ndarray
    labels: np.ndarray
    speaker_ids: np.ndarray
    fused: np.ndarray
    gates: dict[str, np.ndarray] = field(default_factory=dict)
    gammas: dict[str, np.ndarray] = field(default_factory=dict)
    betas: dict[str, np.ndarray] = field(default_factory=dict)

    def confusion(self, num_classes: int) -> ConfusionMatrix:
        return confusion_matrix(self.predictions, self.labels, num_classes)


def predict(
    params: ModelParameters,
    corpus: DialogueCorpus,
    ablation: Ablation = Ablation.FULL,
    batch_size: int = 32,
) -> Predictions:
    """Argmax emotion predictions in corpus order, batching consecutive dialogues."""
    if len(corpus) == 0:
        raise ContractError("Nothing to predict on an empty corpus")
    config = params.config
    if corpus.modality_dims != config.modality_dims:
        raise ContractError(
            f"Corpus modalities {corpus.modality_dims} do not match the model "
            f"{config.modality_dims}"
        )
    logits, fused = [], []
    gates: dict[str, list[np.ndarray]] = {m: [] for m in config.modalities}
    gammas: dict[str, list[np.ndarray]] = {m: [] for m in config.modalities}
    betas: dict[str, list[np.ndarray]] = {m: [] for m in config.modalities}
    for start in range(0, len(corpus), batch_size):
        batch = make_batch(
            corpus.dialogues[start : start + batch_size],
            config.modalities,
            config.window,
            num_speakers=config.num_speakers,
        )
        output = forward(params, batch, ablation)
        logits.append(output.emotion_logits.data)
        fused.append(output.fused.data)
        for m in config.modalities:
            gates[m].append(output.gates[m].data)
            gammas[m].append(output.gammas[m].data)
            betas[m].append(output.betas[m].data)

    stacked = np.vstack(logits)
    return Predictions(
        predictions=np.argmax(stacked, axis=1),
        probabilities=softmax(stacked),
        labels=corpus.labels(),
        speaker_ids=corpus.speaker_ids(),
        fused=np.vstack(fused),
        gates={m: np.vstack(v) for m, v in gates.items()},
        gammas={m: np.vstack(v) for m, v in gammas.items()},
        betas={m: np.vstack(v) for m, v in betas.items()},
    )
