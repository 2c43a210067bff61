from dataclasses import dataclass
from typing import Sequence

import numpy as np
import structlog

from speaker_adaptive.data.corpus import DialogueCorpus
from speaker_adaptive.defaults import DEFAULT_SPLIT_FRACTIONS, MAX_SPLIT_ATTEMPTS
from speaker_adaptive.enums import Split
from speaker_adaptive.exceptions import ConfigError, SplitError

logger = structlog.getLogger(__name__)


@dataclass(frozen=True)
class CorpusSplits:
    train: DialogueCorpus
    validation: DialogueCorpus
    test: DialogueCorpus

    def __getitem__(self, split: Split) -> DialogueCorpus:
        return getattr(self, split.value)

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)

    def require(self, split: Split) -> DialogueCorpus:
        """The split a command reports on; an empty one is a configuration problem."""
        corpus = self[split]
        if len(corpus) == 0:
            raise ConfigError(
                f"The {split.value} split is empty; raise its split fraction",
                key_path="evaluation.split_fractions",
            )
        return corpus


def validate_fractions(fractions: Sequence[float]) -> tuple[float, float, float]:
    if len(fractions) != 3:
        raise ConfigError(f"Expected three split fractions, got {len(fractions)}")
    if any(f < 0 for f in fractions) or not np.isclose(sum(fractions), 1.0, atol=1e-9):
        raise ConfigError(
            f"Split fractions must be non-negative and sum to 1: {fractions}"
        )
    return float(fractions[0]), float(fractions[1]), float(fractions[2])


def split_sizes(n: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    """Half-up rounding for train and validation; test takes the remainder."""
    f_train, f_val, _ = validate_fractions(fractions)
    n_train = min(n, int(np.floor(f_train * n + 0.5)))
    n_val = min(n - n_train, int(np.floor(f_val * n + 0.5)))
    return n_train, n_val, n - n_train - n_val


def split_corpus(
    corpus: DialogueCorpus,
    fractions: Sequence[float] = DEFAULT_SPLIT_FRACTIONS,
    seed: int = 0,
) -> CorpusSplits:
    """
    Split at dialogue granularity. Each attempt reshuffles with a generator seeded by
    (seed, attempt) until every speaker of the corpus appears in the training split.
    Dialogues keep their corpus order inside each split.
    """
    n_train, n_val, _ = split_sizes(len(corpus), fractions)
    speakers = corpus.speakers_present()
    for attempt in range(MAX_SPLIT_ATTEMPTS):
        order = np.random.default_rng([seed, attempt]).permutation(len(corpus))
        train_idx = np.sort(order[:n_train])
        train = corpus.subset(train_idx.tolist())
        missing = speakers - train.speakers_present()
        if missing:
            logger.debug(
                "Split attempt %s left speakers %s out of train",
                attempt,
                sorted(missing),
            )
            continue
        splits = CorpusSplits(
            train=train,
            validation=corpus.subset(
                np.sort(order[n_train : n_train + n_val]).tolist()
            ),
            test=corpus.subset(np.sort(order[n_train + n_val :]).tolist()),
        )
        logger.debug("Split corpus into %s/%s/%s dialogues", *splits.sizes())
        return splits
    raise SplitError(
        f"No split with every speaker in train after {MAX_SPLIT_ATTEMPTS} attempts"
    )
