import numpy as np
import pytest

from speaker_adaptive.data.corpus import DialogueCorpus
from speaker_adaptive.evaluation.predict import predict
from speaker_adaptive.exceptions import ContractError
from speaker_adaptive.model.params import init_model
from speaker_adaptive.training.config import TrainConfig
from speaker_adaptive.training.trainer import model_config_for


def test_probabilities_agree_with_predictions(
    tiny_corpus: DialogueCorpus, fast_train_config: TrainConfig
) -> None:
    params = init_model(model_config_for(tiny_corpus, fast_train_config), 0)
    out = predict(params, tiny_corpus)
    assert out.probabilities.shape == (tiny_corpus.num_utterances, 3)
    np.testing.assert_allclose(out.probabilities.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(out.probabilities.argmax(axis=1), out.predictions)
    np.testing.assert_array_equal(out.labels, tiny_corpus.labels())


def test_batch_size_does_not_change_predictions(
    tiny_corpus: DialogueCorpus, fast_train_config: TrainConfig
) -> None:
    params = init_model(model_config_for(tiny_corpus, fast_train_config), 0)
    whole = predict(params, tiny_corpus, batch_size=len(tiny_corpus))
    single = predict(params, tiny_corpus, batch_size=1)
    np.testing.assert_allclose(
        single.probabilities, whole.probabilities, rtol=0, atol=1e-12
    )
    np.testing.assert_array_equal(single.predictions, whole.predictions)


def test_empty_corpus(
    tiny_corpus: DialogueCorpus, fast_train_config: TrainConfig
) -> None:
    params = init_model(model_config_for(tiny_corpus, fast_train_config), 0)
    empty = tiny_corpus.subset([])
    with pytest.raises(ContractError, match="empty corpus"):
        predict(params, empty)
