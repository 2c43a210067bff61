import numpy as np
import structlog

from speaker_adaptive.data.corpus import DialogueCorpus, GenerativeTruth
from speaker_adaptive.exceptions import ContractError

logger = structlog.getLogger(__name__)

_LOG_2PI = np.log(2.0 * np.pi)


def _gaussian_loglik(x: np.ndarray, mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    """Diagonal Gaussian log density summed over the last axis."""
    return -0.5 * (_LOG_2PI + np.log(var) + (x - mean) ** 2 / var).sum(axis=-1)


def _log_priors(truth: GenerativeTruth, speaker_ids: np.ndarray) -> np.ndarray:
    try:
        priors = {int(s): truth.emotion_prior(int(s)) for s in np.unique(speaker_ids)}
    except KeyError as err:
        raise ContractError(f"No generative profile for speaker {err.args[0]}")
    with np.errstate(divide="ignore"):
        return np.log(np.stack([priors[int(s)] for s in speaker_ids]))


def _speaker_arrays(
    truth: GenerativeTruth, modality: str, speaker_ids: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        profiles = [truth.profile(int(s)) for s in speaker_ids]
    except KeyError as err:
        raise ContractError(f"No generative profile for speaker {err.args[0]}")
    a = np.stack([p.scale_array(modality) for p in profiles])
    c = np.stack([p.shift_array(modality) for p in profiles])
    r = np.array([p.reliability[modality] for p in profiles])
    return a, c, r


def oracle_scores(corpus: DialogueCorpus, truth: GenerativeTruth) -> np.ndarray:
    """
    Unnormalized log posterior of every emotion for every utterance (N x E).

    Starts from the speaker's own emotion prior. Each modality is a two-component
    mixture: with probability r the speaker's distortion of a noisy prototype,
    otherwise noise from the speaker's marginal.
    """
    speaker_ids = corpus.speaker_ids()
    sigma = truth.noise_sigma
    scores = _log_priors(truth, speaker_ids)
    if scores.shape[1] != corpus.num_emotions:
        raise ContractError(
            f"Emotion priors cover {scores.shape[1]} emotions, "
            f"the corpus has {corpus.num_emotions}"
        )
    for m in corpus.modalities:
        x = corpus.features(m)
        a, c, r = _speaker_arrays(truth, m, speaker_ids)
        prototypes = truth.prototype_array(m)
        means = a[:, None, :] * prototypes[None, :, :] + c[:, None, :]
        junk = _gaussian_loglik(x, c, a**2 * (1.0 + sigma**2))
        with np.errstate(divide="ignore"):
            log_r, log_not_r = np.log(r), np.log1p(-r)
        if sigma == 0.0:
            # the signal component is a point mass: a match outweighs any density
            close = np.isclose(x[:, None, :], means, rtol=0.0, atol=1e-12)
            hit = np.all(close, axis=-1)
            hit &= (r > 0)[:, None]
            scores = scores + np.where(hit, np.inf, (log_not_r + junk)[:, None])
        else:
            signal = _gaussian_loglik(
                x[:, None, :], means, (a**2 * sigma**2)[:, None, :]
            )
            scores = scores + np.logaddexp(
                log_r[:, None] + signal, (log_not_r + junk)[:, None]
            )
    return scores


def oracle_predict(
    corpus: DialogueCorpus, truth: GenerativeTruth | None = None
) -> np.ndarray:
    truth = truth if truth is not None else corpus.truth
    if truth is None:
        raise ContractError("The Bayes oracle needs a generated corpus with its truth")
    if corpus.num_utterances == 0:
        raise ContractError("Cannot score the oracle on an empty corpus")
    scores = oracle_scores(corpus, truth)
    # all -inf rows (impossible under the model) fall back to class 0
    scores = np.where(np.isnan(scores), -np.inf, scores)
    return np.argmax(scores, axis=1)


def bayes_oracle(
    corpus: DialogueCorpus, truth: GenerativeTruth | None = None
) -> float:
    """Accuracy of the maximum a posteriori classifier under the generating model."""
    predictions = oracle_predict(corpus, truth)
    accuracy = float(np.mean(predictions == corpus.labels()))
    logger.debug(
        "Bayes oracle accuracy %.4f on %s utterances", accuracy, predictions.size
    )
    return accuracy
