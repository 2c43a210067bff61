import json
import logging

import pytest
from pytest_mock import MockerFixture

from speaker_adaptive.core.config import settings
from speaker_adaptive.core.logging_utils import (
    bind_run_context,
    clear_run_context,
    get_run_id,
    new_run_id,
    setup_logging,
)


@pytest.fixture
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    clear_run_context()
    root.handlers = handlers
    root.setLevel(level)


@pytest.mark.usefixtures("restore_root_logger")
def test_json_lines_carry_run_context(mocker: MockerFixture, capsys) -> None:
    mocker.patch.object(settings, "LOG_FORMAT", "json")
    setup_logging("INFO")
    run_id = new_run_id()
    bind_run_context(ablation="no_gate", seed=3)

    logging.getLogger("speaker_adaptive.test").info("epoch %s done", 7)
    logging.getLogger("speaker_adaptive.test").debug("not shown")

    captured = capsys.readouterr()
    assert captured.out == ""
    lines = captured.err.strip().splitlines()
    assert len(lines) == 1
    record = json.loads(lines[0])
    assert record["event"] == "epoch 7 done"
    assert record["level"] == "info"
    assert record["logger"] == "speaker_adaptive.test"
    assert record["run_id"] == run_id
    assert (record["ablation"], record["seed"]) == ("no_gate", 3)


def test_new_run_id_is_current() -> None:
    run_id = new_run_id()
    assert len(run_id) == 12
    assert get_run_id() == run_id
