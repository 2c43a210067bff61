import numpy as np
import pytest

from speaker_adaptive.enums import Ablation
from speaker_adaptive.model.params import ModelConfig, init_model
from speaker_adaptive.model.surgery import SurgeryRegistry, registry


def test_every_ablation_is_registered() -> None:
    assert set(registry.surgeries) == set(Ablation)


def test_unregistered_ablation() -> None:
    with pytest.raises(NotImplementedError):
        SurgeryRegistry().apply(Ablation.FULL, None)  # type: ignore[arg-type]


def test_custom_registry_from_mapping(small_model_config: ModelConfig) -> None:
    custom = SurgeryRegistry(
        {Ablation.FULL: lambda params: frozenset({"gate.audio.b"})}
    )
    params = init_model(small_model_config, 0)
    assert "gate.audio.b" not in custom.trainable(Ablation.FULL, params)


def test_no_film_pins_identity(small_model_config: ModelConfig) -> None:
    params = init_model(small_model_config, 0)
    params.assign(
        {
            name: value + 1.0
            for name, value in params.arrays().items()
            if name.startswith("film.")
        }
    )
    frozen = registry.apply(Ablation.NO_FILM, params)
    assert frozen == {
        f"film.{m}.{p}"
        for m in small_model_config.modalities
        for p in ("w_gamma", "b_gamma", "w_beta", "b_beta")
    }
    for m, block in params.film.blocks.items():
        assert not block.w_gamma.data.any()
        assert not block.w_beta.data.any()
        np.testing.assert_array_equal(block.b_gamma.data, 1.0)
        np.testing.assert_array_equal(block.b_beta.data, 0.0)


@pytest.mark.parametrize(
    ("ablation", "frozen_prefixes"),
    [
        (Ablation.FULL, ()),
        (Ablation.NO_FILM, ("film.",)),
        (Ablation.NO_GATE, ("gate.",)),
        (Ablation.NO_AUX, ("speaker_head.",)),
    ],
)
def test_trainable_parameters(
    small_model_config: ModelConfig, ablation: Ablation, frozen_prefixes: tuple
) -> None:
    params = init_model(small_model_config, 0)
    trainable = registry.trainable(ablation, params)
    expected = [n for n in params if not n.startswith(frozen_prefixes)]
    assert trainable == expected


def test_surgery_leaves_other_parameters(small_model_config: ModelConfig) -> None:
    params = init_model(small_model_config, 0)
    before = params.copy()
    for ablation in (Ablation.FULL, Ablation.NO_GATE, Ablation.NO_AUX):
        registry.apply(ablation, params)
    assert params.equals(before)


@pytest.mark.parametrize("seed", range(20))
def test_census_matches_closed_form(seed: int) -> None:
    rng = np.random.default_rng(seed)
    config = ModelConfig(
        num_speakers=int(rng.integers(1, 10)),
        num_emotions=int(rng.integers(1, 8)),
        modality_dims={
            f"m{i}": int(rng.integers(1, 20)) for i in range(int(rng.integers(1, 4)))
        },
        d_spk=int(rng.integers(1, 20)),
        d_h=int(rng.integers(1, 40)),
    )
    params = init_model(config, seed)
    assert params.census() == config.census()
    assert {n: t.shape for n, t in params.items()} == config.expected_shapes()


def test_default_census() -> None:
    config = ModelConfig(num_speakers=6, num_emotions=4)
    # (S+1)d_spk + 2 modalities x (FiLM + encoder + gate) + both heads
    per_modality = 2 * (16 * 12 + 12) + (2 * 12 * 32 + 32) + (16 * 32 + 32)
    expected = 7 * 16 + 2 * per_modality + (64 * 4 + 4) + (64 * 6 + 6)
    assert config.census() == expected


def test_init_is_deterministic(small_model_config: ModelConfig) -> None:
    reference = init_model(small_model_config, 3)
    assert reference.equals(init_model(small_model_config, 3))
    assert not reference.equals(init_model(small_model_config, 4))
