from pathlib import Path

import pytest

from speaker_adaptive.cli.run_config import (
    EFFECTIVE_CONFIG_FILE,
    RunConfig,
    load_run_config,
    persist_effective_config,
    validate_run_config,
    with_overrides,
)
from speaker_adaptive.enums import Ablation
from speaker_adaptive.exceptions import ConfigError, DataError

EXAMPLE_CONFIG = Path(__file__).parents[2] / "configs" / "example.toml"


def test_example_config_spells_out_the_defaults() -> None:
    assert load_run_config(EXAMPLE_CONFIG) == RunConfig()


def test_small_config(small_config_path: Path) -> None:
    config = load_run_config(small_config_path)
    assert config.seeds == [0]
    assert config.generator.dialogues == 24
    assert config.train.architecture.d_h == 6
    assert config.train.lambda_spk == 0.5
    assert config.evaluation.lambda_grid == [0.0, 0.5]


def test_json_config(tmp_path: Path) -> None:
    path = tmp_path / "config.json"
    path.write_text(
        '{"train": {"lambda": 0.2, "ablation": "no_gate"}}', encoding="utf-8"
    )
    config = load_run_config(path)
    assert config.train.lambda_spk == 0.2
    assert config.train.ablation == Ablation.NO_GATE


@pytest.mark.parametrize(
    ("data", "key_path"),
    [
        ({"train": {"learning_rte": 0.1}}, "train.learning_rte"),
        ({"train": {"lambda": -0.5}}, "train.lambda"),
        ({"generator": {"num_speakers": 0}}, "generator.num_speakers"),
        (
            {"evaluation": {"split_fractions": [0.5, 0.5, 0.5]}},
            "evaluation.split_fractions",
        ),
        ({"seeds": []}, "seeds"),
        ({"seeds": [3, 0, 3]}, "seeds"),
        ({"evaluation": {"lambda_grid": [0.5, 0.5]}}, "evaluation.lambda_grid"),
        ({"jobs": 0}, "jobs"),
    ],
)
def test_invalid_config_reports_key_path(data: dict, key_path: str) -> None:
    with pytest.raises(ConfigError) as err:
        validate_run_config(data)
    assert err.value.key_path == key_path


def test_unparsable_file(tmp_path: Path) -> None:
    path = tmp_path / "config.toml"
    path.write_text("[train\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_missing_file(tmp_path: Path) -> None:
    with pytest.raises(DataError):
        load_run_config(tmp_path / "absent.toml")


def test_overrides() -> None:
    config = with_overrides(
        RunConfig(),
        {
            "train.lambda": 0.2,
            "train.ablation": "no_aux",
            "generator.seed": 9,
            "seeds": [3],
            "jobs": None,
        },
    )
    assert config.train.lambda_spk == 0.2
    assert config.train.ablation == Ablation.NO_AUX
    assert config.generator.seed == 9
    assert config.seeds == [3]
    assert config.jobs == RunConfig().jobs


def test_persisted_config_reloads(tmp_path: Path) -> None:
    config = with_overrides(RunConfig(), {"train.lambda": 1.0})
    path = persist_effective_config(config, tmp_path / "out")
    assert path.name == EFFECTIVE_CONFIG_FILE
    assert load_run_config(path) == config
