import pytest

from speaker_adaptive.data.corpus import DialogueCorpus
from speaker_adaptive.data.split import split_corpus, split_sizes, validate_fractions
from speaker_adaptive.enums import Split
from speaker_adaptive.exceptions import ConfigError, SplitError


@pytest.mark.parametrize(
    ("n", "fractions", "expected"),
    [
        (10, (0.7, 0.15, 0.15), (7, 2, 1)),
        (20, (0.7, 0.15, 0.15), (14, 3, 3)),
        (24, (0.7, 0.15, 0.15), (17, 4, 3)),
        (5, (1.0, 0.0, 0.0), (5, 0, 0)),
        (3, (0.5, 0.5, 0.0), (2, 1, 0)),
    ],
)
def test_split_sizes(n: int, fractions: tuple, expected: tuple) -> None:
    assert split_sizes(n, fractions) == expected


@pytest.mark.parametrize(
    "fractions",
    [
        (0.5, 0.5),
        (0.7, 0.2, 0.2),
        (1.2, -0.1, -0.1),
    ],
)
def test_invalid_fractions(fractions: tuple) -> None:
    with pytest.raises(ConfigError):
        validate_fractions(fractions)


def test_split_partitions_dialogues(tiny_corpus: DialogueCorpus) -> None:
    splits = split_corpus(tiny_corpus, seed=0)
    assert splits.sizes() == (17, 4, 3)
    ids = [
        [d.dialogue_id for d in splits[split].dialogues]
        for split in (Split.TRAIN, Split.VALIDATION, Split.TEST)
    ]
    flat = [i for part in ids for i in part]
    assert sorted(flat) == [d.dialogue_id for d in tiny_corpus.dialogues]
    # corpus order is kept inside each split
    for part in ids:
        assert part == sorted(part)
    assert splits.train.speakers_present() == tiny_corpus.speakers_present()


def test_split_is_deterministic(tiny_corpus: DialogueCorpus) -> None:
    first = split_corpus(tiny_corpus, seed=4)
    second = split_corpus(tiny_corpus, seed=4)
    for split in Split:
        assert first[split].content_equal(second[split])


def test_split_shares_metadata(tiny_corpus: DialogueCorpus) -> None:
    splits = split_corpus(tiny_corpus)
    assert splits.test.truth is tiny_corpus.truth
    assert splits.test.num_speakers == tiny_corpus.num_speakers


def test_unsatisfiable_split(tiny_corpus: DialogueCorpus) -> None:
    with pytest.raises(SplitError):
        split_corpus(tiny_corpus, (0.0, 0.5, 0.5))
