import numpy as np
import pytest

from speaker_adaptive.data.corpus import DialogueCorpus
from speaker_adaptive.data.generator import GeneratorConfig, generate_corpus
from speaker_adaptive.data.oracle import bayes_oracle, oracle_predict, oracle_scores
from speaker_adaptive.enums import PriorShape
from speaker_adaptive.exceptions import ContractError


def _config(**update) -> GeneratorConfig:
    base = {
        "num_speakers": 3,
        "num_emotions": 3,
        "d_audio": 4,
        "d_visual": 4,
        "dialogues": 30,
        "utterances_per_dialogue": 5,
        "seed": 2,
    }
    return GeneratorConfig(**(base | update))


def test_noiseless_oracle_is_perfect() -> None:
    corpus, _ = generate_corpus(
        _config(noise_sigma=0.0, heterogeneous=False, uniform_reliability=1.0)
    )
    assert bayes_oracle(corpus) == 1.0


def test_uninformative_modalities_fall_back_to_prior() -> None:
    corpus, _ = generate_corpus(
        _config(
            heterogeneous=False,
            uniform_reliability=0.0,
            prior=PriorShape.LONG_TAIL,
        )
    )
    assert not oracle_predict(corpus).any()


def test_scores_shape(tiny_corpus: DialogueCorpus) -> None:
    assert tiny_corpus.truth is not None
    scores = oracle_scores(tiny_corpus, tiny_corpus.truth)
    assert scores.shape == (tiny_corpus.num_utterances, tiny_corpus.num_emotions)
    assert np.all(np.isfinite(scores))


def test_oracle_beats_chance(tiny_corpus: DialogueCorpus) -> None:
    assert bayes_oracle(tiny_corpus) > 1.0 / tiny_corpus.num_emotions


def test_oracle_needs_truth(tiny_corpus: DialogueCorpus) -> None:
    stripped = DialogueCorpus(
        dialogues=tiny_corpus.dialogues,
        modality_dims=tiny_corpus.modality_dims,
        num_emotions=tiny_corpus.num_emotions,
        num_speakers=tiny_corpus.num_speakers,
    )
    with pytest.raises(ContractError):
        bayes_oracle(stripped)
    assert bayes_oracle(stripped, tiny_corpus.truth) == bayes_oracle(tiny_corpus)


def test_oracle_on_empty_corpus(tiny_corpus: DialogueCorpus) -> None:
    with pytest.raises(ContractError):
        bayes_oracle(tiny_corpus.subset([]))


def test_uninformative_modalities_fall_back_to_speaker_prior() -> None:
    corpus, profiles = generate_corpus(
        _config(heterogeneous=False, uniform_reliability=0.0)
    )
    assert corpus.truth is not None
    leaning = [
        p.model_copy(
            update={"emotion_prior": np.roll([0.5, 0.3, 0.2], p.speaker_id).tolist()}
        )
        for p in profiles
    ]
    truth = corpus.truth.model_copy(update={"profiles": leaning})
    np.testing.assert_array_equal(oracle_predict(corpus, truth), corpus.speaker_ids())
