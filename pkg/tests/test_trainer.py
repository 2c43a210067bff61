import numpy as np
import pytest
from pytest_mock import MockerFixture

from speaker_adaptive.data.split import CorpusSplits
from speaker_adaptive.enums import Ablation
from speaker_adaptive.exceptions import ConfigError, NumericalError
from speaker_adaptive.model.forward import compute_loss
from speaker_adaptive.model.layers import LossBreakdown
from speaker_adaptive.model.params import init_model
from speaker_adaptive.tensor import Tensor
from speaker_adaptive.training.config import TrainConfig
from speaker_adaptive.training.trainer import class_weights_for, model_config_for, train


def _with(config: TrainConfig, **update) -> TrainConfig:
    return config.model_copy(update=update)


@pytest.mark.parametrize("class_weighting", [False, True])
def test_training_is_deterministic(
    tiny_splits: CorpusSplits, fast_train_config: TrainConfig, class_weighting: bool
) -> None:
    config = _with(fast_train_config, class_weighting=class_weighting)
    first, curve = train(tiny_splits, config)
    second, _ = train(tiny_splits, config)
    assert first.equals(second)
    assert [r.epoch for r in curve] == [1, 2, 3]
    assert first.epoch == 3
    assert first.adam.step == 3 * 5


def test_curve_is_finite(
    tiny_splits: CorpusSplits, fast_train_config: TrainConfig
) -> None:
    checkpoint, curve = train(tiny_splits, fast_train_config)
    for record in curve:
        assert np.isfinite(record.train_loss)
        assert record.train_loss == pytest.approx(
            record.train_l_erc + 0.5 * record.train_l_spk, rel=1e-12
        )
        assert 0.0 <= record.val_weighted_f1 <= 1.0
    assert checkpoint.best_val_weighted_f1 == max(r.val_weighted_f1 for r in curve)


def test_resume_matches_uninterrupted_run(
    tiny_splits: CorpusSplits, fast_train_config: TrainConfig
) -> None:
    straight, _ = train(tiny_splits, _with(fast_train_config, epochs=4))
    halfway, _ = train(tiny_splits, _with(fast_train_config, epochs=2))
    resumed, curve = train(tiny_splits, _with(fast_train_config, epochs=4), halfway)
    assert resumed.equals(straight)
    assert len(curve) == 4
    assert halfway.epoch == 2


def test_resume_rejects_changed_settings(
    tiny_splits: CorpusSplits, fast_train_config: TrainConfig
) -> None:
    halfway, _ = train(tiny_splits, _with(fast_train_config, epochs=1))
    with pytest.raises(ConfigError) as err:
        train(tiny_splits, _with(fast_train_config, lambda_spk=0.2), halfway)
    assert err.value.key_path == "train"


def test_no_film_keeps_identity(
    tiny_splits: CorpusSplits, fast_train_config: TrainConfig
) -> None:
    config = _with(fast_train_config, ablation=Ablation.NO_FILM)
    checkpoint, _ = train(tiny_splits, config)
    for block in checkpoint.params.film.blocks.values():
        assert not block.w_gamma.data.any()
        assert not block.w_beta.data.any()
        np.testing.assert_array_equal(block.b_gamma.data, 1.0)
        np.testing.assert_array_equal(block.b_beta.data, 0.0)


def test_no_gate_freezes_gate_parameters(
    tiny_splits: CorpusSplits, fast_train_config: TrainConfig
) -> None:
    config = _with(fast_train_config, ablation=Ablation.NO_GATE)
    checkpoint, _ = train(tiny_splits, config)
    initial = init_model(model_config_for(tiny_splits.train, config), config.seed)
    for name in checkpoint.params:
        if name.startswith("gate."):
            np.testing.assert_array_equal(
                checkpoint.params[name].data, initial[name].data
            )
    assert not np.array_equal(
        checkpoint.params["emotion_head.w"].data, initial["emotion_head.w"].data
    )


def test_zero_lambda_matches_no_aux(
    tiny_splits: CorpusSplits, fast_train_config: TrainConfig
) -> None:
    full, _ = train(tiny_splits, _with(fast_train_config, lambda_spk=0.0))
    no_aux, _ = train(tiny_splits, _with(fast_train_config, ablation=Ablation.NO_AUX))
    assert full.params.equals(no_aux.params)


def test_non_finite_loss_aborts(
    mocker: MockerFixture, tiny_splits: CorpusSplits, fast_train_config: TrainConfig
) -> None:
    def poisoned(*args, **kwargs):
        output, losses = compute_loss(*args, **kwargs)
        return output, LossBreakdown(
            l_erc=losses.l_erc,
            l_spk=losses.l_spk,
            lambda_spk=losses.lambda_spk,
            total=Tensor(np.nan, requires_grad=True),
        )

    mocker.patch(
        "speaker_adaptive.training.trainer.compute_loss", side_effect=poisoned
    )
    with pytest.raises(NumericalError) as err:
        train(tiny_splits, fast_train_config)
    assert (err.value.epoch, err.value.batch) == (1, 0)


def test_empty_validation_split(
    tiny_splits: CorpusSplits, fast_train_config: TrainConfig
) -> None:
    splits = CorpusSplits(
        train=tiny_splits.train,
        validation=tiny_splits.validation.subset([]),
        test=tiny_splits.test,
    )
    with pytest.raises(ConfigError, match="validation split is empty"):
        train(splits, fast_train_config)


def test_early_stopping(
    tiny_splits: CorpusSplits, fast_train_config: TrainConfig
) -> None:
    config = _with(fast_train_config, epochs=5, learning_rate=1e-12, patience=1)
    checkpoint, curve = train(tiny_splits, config)
    assert checkpoint.stopped_early
    assert checkpoint.epoch == 2
    assert checkpoint.best_epoch == 1
    assert len(curve) == 2


def test_zero_epochs_returns_initial_state(
    tiny_splits: CorpusSplits, fast_train_config: TrainConfig
) -> None:
    config = _with(fast_train_config, epochs=0)
    checkpoint, curve = train(tiny_splits, config)
    assert curve == []
    assert checkpoint.best_val_weighted_f1 is None
    initial = init_model(model_config_for(tiny_splits.train, config), config.seed)
    assert checkpoint.params.equals(initial)


def test_class_weights() -> None:
    weights = class_weights_for(np.array([0, 0, 0, 1]), 3)
    np.testing.assert_allclose(weights, [3 / 7, 9 / 7, 9 / 7])
    assert weights.mean() == pytest.approx(1.0)
