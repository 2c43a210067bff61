from pathlib import Path

import pandas as pd
import structlog

from speaker_adaptive.data.corpus import DialogueCorpus
from speaker_adaptive.evaluation.predict import predict
from speaker_adaptive.evaluation.report import write_table
from speaker_adaptive.training.checkpoint import Checkpoint

logger = structlog.getLogger(__name__)


def dump_embeddings(checkpoint: Checkpoint, corpus: DialogueCorpus, path: Path) -> Path:
    """
    Fused features of every utterance with its emotion and speaker, one CSV row each,
    for projection and plotting outside this package.
    """
    config = checkpoint.train_config
    predictions = predict(
        checkpoint.best_params, corpus, config.ablation, config.batch_size
    )
    frame = pd.DataFrame(
        predictions.fused,
        columns=[f"fused_{i}" for i in range(predictions.fused.shape[1])],
    )
    frame["emotion"] = predictions.labels
    frame["speaker_id"] = predictions.speaker_ids
    path = write_table(frame, Path(path))
    logger.info("Dumped %s fused vectors to %s", len(frame), path)
    return path
