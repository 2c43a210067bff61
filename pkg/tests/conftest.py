import os
from pathlib import Path

import pytest

from speaker_adaptive.data.corpus import DialogueCorpus
from speaker_adaptive.data.generator import GeneratorConfig, generate_corpus
from speaker_adaptive.data.split import CorpusSplits, split_corpus
from speaker_adaptive.model.params import ArchitectureConfig, ModelConfig
from speaker_adaptive.training.config import TrainConfig

SMALL_CONFIG_TOML = """\
seeds = [0]

[generator]
num_speakers = 3
num_emotions = 3
d_audio = 4
d_visual = 4
dialogues = 24
utterances_per_dialogue = 5
seed = 3

[train]
epochs = 2
batch_size = 4
learning_rate = 0.01

[train.architecture]
d_spk = 4
d_h = 6
window = 2

[evaluation]
lambda_grid = [0.0, 0.5]
"""


# Runs after argument parsing but before the test modules are imported, so the
# settings singleton picks up the environment
def pytest_configure(config) -> None:
    os.environ["ENVIRONMENT"] = "testing"


_deselected_slow: list[str] = []


def pytest_deselected(items: list[pytest.Item]) -> None:
    _deselected_slow.extend(i.nodeid for i in items if i.get_closest_marker("slow"))


def pytest_terminal_summary(terminalreporter) -> None:
    if _deselected_slow:
        terminalreporter.write_line(
            f"{len(_deselected_slow)} slow acceptance tests deselected; "
            "run `pytest -m slow` before merging changes to the model or generator",
            yellow=True,
        )


@pytest.fixture(scope="session")
def tiny_generator_config() -> GeneratorConfig:
    return GeneratorConfig(
        num_speakers=3,
        num_emotions=3,
        d_audio=4,
        d_visual=4,
        dialogues=24,
        utterances_per_dialogue=5,
        noise_sigma=0.8,
        seed=7,
    )


@pytest.fixture(scope="session")
def tiny_corpus(tiny_generator_config: GeneratorConfig) -> DialogueCorpus:
    corpus, _ = generate_corpus(tiny_generator_config)
    return corpus


@pytest.fixture(scope="session")
def tiny_splits(tiny_corpus: DialogueCorpus) -> CorpusSplits:
    return split_corpus(tiny_corpus, seed=0)


@pytest.fixture
def fast_train_config() -> TrainConfig:
    return TrainConfig(
        epochs=3,
        batch_size=4,
        learning_rate=0.01,
        patience=50,
        architecture=ArchitectureConfig(d_spk=4, d_h=6, window=2),
    )


@pytest.fixture
def small_model_config() -> ModelConfig:
    return ModelConfig(
        num_speakers=3,
        num_emotions=3,
        modality_dims={"audio": 4, "visual": 4},
        d_spk=4,
        d_h=6,
        window=2,
    )


@pytest.fixture
def small_config_path(tmp_path: Path) -> Path:
    path = tmp_path / "config.toml"
    path.write_text(SMALL_CONFIG_TOML, encoding="utf-8")
    return path

