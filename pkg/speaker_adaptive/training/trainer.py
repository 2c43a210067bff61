import numpy as np
import structlog

from speaker_adaptive.core.logging_utils import bind_run_context
from speaker_adaptive.core.timing import log_timing
from speaker_adaptive.data.corpus import DialogueCorpus
from speaker_adaptive.data.split import CorpusSplits
from speaker_adaptive.evaluation.metrics import weighted_f1
from speaker_adaptive.evaluation.predict import predict
from speaker_adaptive.exceptions import ConfigError, NumericalError
from speaker_adaptive.model.forward import compute_loss, make_batch
from speaker_adaptive.model.params import ModelConfig, ModelParameters, init_model
from speaker_adaptive.model.surgery import registry
from speaker_adaptive.tensor import backward
from speaker_adaptive.training.checkpoint import Checkpoint, EpochRecord
from speaker_adaptive.training.config import TrainConfig
from speaker_adaptive.training.optim import AdamState, adam_step

logger = structlog.getLogger(__name__)

# stream ids mixed into the run seed
_SHUFFLE_STREAM = 1
_OOV_STREAM = 2


def model_config_for(corpus: DialogueCorpus, config: TrainConfig) -> ModelConfig:
    return ModelConfig.build(
        num_speakers=corpus.num_speakers,
        num_emotions=corpus.num_emotions,
        modality_dims=corpus.modality_dims,
        architecture=config.architecture,
    )


def class_weights_for(labels: np.ndarray, num_emotions: int) -> np.ndarray:
    """Inverse label frequency normalized to mean 1; absent classes count once."""
    counts = np.bincount(labels, minlength=num_emotions)
    counts = np.maximum(counts, 1).astype(np.float64)
    weights = counts.sum() / counts
    return weights / weights.mean()


def validation_score(
    params: ModelParameters, corpus: DialogueCorpus, config: TrainConfig
) -> float:
    predictions = predict(params, corpus, config.ablation, config.batch_size)
    return weighted_f1(predictions.confusion(corpus.num_emotions))


def _initial_checkpoint(model_config: ModelConfig, config: TrainConfig) -> Checkpoint:
    params = init_model(model_config, config.seed)
    registry.apply(config.ablation, params)
    return Checkpoint(
        train_config=config,
        model_config=model_config,
        params=params,
        best_params=params.copy(),
        adam=AdamState.zeros(params.arrays()),
        epoch=0,
        rng_state=np.random.default_rng([config.seed, _OOV_STREAM]).bit_generator.state,
    )


def _resumed_checkpoint(
    resume: Checkpoint, model_config: ModelConfig, config: TrainConfig
) -> Checkpoint:
    if not config.resumable_from(resume.train_config):
        raise ConfigError(
            "Only the epoch budget may change when resuming a checkpoint",
            key_path="train",
        )
    if resume.model_config != model_config:
        raise ConfigError("The checkpoint was trained on a corpus of other dimensions")
    return Checkpoint(
        train_config=config,
        model_config=model_config,
        params=resume.params.copy(),
        best_params=resume.best_params.copy(),
        adam=resume.adam.copy(),
        epoch=resume.epoch,
        rng_state=resume.rng_state,
        best_val_weighted_f1=resume.best_val_weighted_f1,
        best_epoch=resume.best_epoch,
        epochs_without_improvement=resume.epochs_without_improvement,
        stopped_early=resume.stopped_early,
        curve=list(resume.curve),
    )


@log_timing
def train(
    splits: CorpusSplits,
    config: TrainConfig,
    resume: Checkpoint | None = None,
) -> tuple[Checkpoint, list[EpochRecord]]:
    """
    Mini-batch training with per-epoch validation and early stopping.

    The epoch shuffle is seeded by (seed, epoch) and the out-of-vocabulary masking
    stream's state is carried in the checkpoint, so a resumed run continues exactly
    where the saved one stopped.
    """
    train_corpus, validation = splits.train, splits.validation
    if len(train_corpus) == 0:
        raise ConfigError(
            "The training split is empty", key_path="evaluation.split_fractions"
        )
    if len(validation) == 0:
        raise ConfigError(
            "The validation split is empty", key_path="evaluation.split_fractions"
        )
    bind_run_context(
        ablation=config.ablation.value, seed=config.seed, lambda_spk=config.lambda_spk
    )

    model_config = model_config_for(train_corpus, config)
    if resume is None:
        state = _initial_checkpoint(model_config, config)
    else:
        state = _resumed_checkpoint(resume, model_config, config)
    params = state.params
    trainable = registry.trainable(config.ablation, params)
    class_weights = (
        class_weights_for(train_corpus.labels(), train_corpus.num_emotions)
        if config.class_weighting
        else None
    )
    oov_rng = np.random.default_rng()
    oov_rng.bit_generator.state = state.rng_state
    logger.info(
        "Training %s of %s scalars from epoch %s to %s",
        params.census(set(trainable)),
        params.census(),
        state.epoch,
        config.epochs,
    )

    while state.epoch < config.epochs and not state.stopped_early:
        epoch = state.epoch + 1
        shuffle = np.random.default_rng([config.seed, _SHUFFLE_STREAM, epoch])
        order = shuffle.permutation(len(train_corpus))
        sums = np.zeros(3)
        seen = 0
        for batch_index, start in enumerate(range(0, len(order), config.batch_size)):
            indices = order[start : start + config.batch_size]
            dialogues = [train_corpus.dialogues[i] for i in indices]
            size = sum(len(d) for d in dialogues)
            batch = make_batch(
                dialogues,
                model_config.modalities,
                model_config.window,
                num_speakers=model_config.num_speakers,
                oov_mask=oov_rng.random(size) < config.oov_rate,
            )
            params.zero_grad()
            _, losses = compute_loss(
                params, batch, config.lambda_spk, config.ablation, class_weights
            )
            values = losses.as_floats()
            if not np.isfinite(values["total"]):
                raise NumericalError("Non-finite loss", epoch=epoch, batch=batch_index)
            backward(losses.total)

            all_grads = params.grads()
            grads = {name: all_grads[name] for name in trainable}
            try:
                updated, state.adam = adam_step(
                    {name: params[name].data for name in trainable},
                    grads,
                    state.adam,
                    state.adam.step + 1,
                    config,
                )
            except NumericalError as err:
                raise NumericalError(
                    "Non-finite gradient",
                    parameter=err.parameter,
                    epoch=epoch,
                    batch=batch_index,
                ) from err
            params.assign(updated)
            sums += size * np.array([values["total"], values["l_erc"], values["l_spk"]])
            seen += size

        score = validation_score(params, validation, config)
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(sums[0] / seen),
            train_l_erc=float(sums[1] / seen),
            train_l_spk=float(sums[2] / seen),
            val_weighted_f1=score,
        )
        state.curve.append(record)
        state.epoch = epoch
        if state.best_val_weighted_f1 is None or score > state.best_val_weighted_f1:
            state.best_val_weighted_f1 = score
            state.best_epoch = epoch
            state.best_params = params.copy()
            state.epochs_without_improvement = 0
        else:
            state.epochs_without_improvement += 1
            if state.epochs_without_improvement >= config.patience:
                state.stopped_early = True
        logger.info(
            "Epoch %s: loss %.4f, validation weighted F1 %.4f",
            epoch,
            record.train_loss,
            score,
            stopped_early=state.stopped_early,
        )

    state.rng_state = oov_rng.bit_generator.state
    return state, list(state.curve)
