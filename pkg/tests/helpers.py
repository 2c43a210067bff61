import numpy as np

from speaker_adaptive.data.corpus import Dialogue, Utterance
from speaker_adaptive.model.params import ModelConfig


def random_dialogues(
    rng: np.random.Generator,
    config: ModelConfig,
    lengths: list[int],
) -> list[Dialogue]:
    return [
        Dialogue(
            dialogue_id=d,
            utterances=tuple(
                Utterance(
                    speaker_id=int(rng.integers(config.num_speakers)),
                    emotion=int(rng.integers(config.num_emotions)),
                    features={
                        m: rng.standard_normal(width)
                        for m, width in config.modality_dims.items()
                    },
                    position=i,
                )
                for i in range(length)
            ),
        )
        for d, length in enumerate(lengths)
    ]
