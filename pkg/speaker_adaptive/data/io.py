"""
Reading and writing corpora as CSV files.

Feature file per modality: `dialogue_id,utterance_idx,speaker_id,f0..f{d-1}`
Labels file: `dialogue_id,utterance_idx,speaker_id,emotion`

Rows are sorted by (dialogue_id, utterance_idx) and floats are written with 17
significant digits so a write/read cycle is lossless.
"""

import re
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from speaker_adaptive.data.corpus import (
    Dialogue,
    DialogueCorpus,
    GenerativeTruth,
    SpeakerProfile,
    Utterance,
)
from speaker_adaptive.exceptions import CorpusParseError, DataError, EmptyCorpusError

logger = structlog.getLogger(__name__)

KEY_COLUMNS = ["dialogue_id", "utterance_idx", "speaker_id"]
LABEL_COLUMNS = KEY_COLUMNS + ["emotion"]
FLOAT_FORMAT = "%.17g"

MANIFEST_FILE = "corpus.json"
LABELS_FILE = "labels.csv"
PROFILES_FILE = "profiles.json"
TRUTH_FILE = "truth.json"

_PARSER_LINE = re.compile(r"line (\d+)")

_profiles_adapter = TypeAdapter(list[SpeakerProfile])


class CorpusManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    num_emotions: int = Field(gt=0)
    num_speakers: int = Field(gt=0)
    modality_dims: dict[str, int]
    synthetic: bool = False


def feature_file(modality: str) -> str:
    return f"features_{modality}.csv"


def _read_rows(path: Path) -> pd.DataFrame:
    """All rows as strings, header included as row 0 (file line = row index + 1)."""
    try:
        frame = pd.read_csv(
            path,
            header=None,
            dtype=str,
            na_filter=False,
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError:
        raise EmptyCorpusError(f"{path}: file is empty")
    except pd.errors.ParserError as err:
        match = _PARSER_LINE.search(str(err))
        line = int(match.group(1)) if match else None
        raise CorpusParseError("ragged row", str(path), line) from err
    except OSError as err:
        raise DataError(f"{path}: {err.strerror or err}") from err
    if len(frame) < 2:
        raise EmptyCorpusError(f"{path}: no utterance rows")
    ragged = frame.isna().any(axis=1).to_numpy()
    if ragged.any():
        raise CorpusParseError("ragged row", str(path), int(np.argmax(ragged)) + 1)
    return frame


def _check_header(frame: pd.DataFrame, expected: list[str], path: Path) -> None:
    header = [str(v).strip() for v in frame.iloc[0]]
    if header != expected:
        raise CorpusParseError(
            f"header {','.join(header)} does not match {','.join(expected)}",
            str(path),
            1,
        )


def _parse_int(cell: str, column: str, path: Path, line: int) -> int:
    try:
        return int(cell)
    except ValueError:
        raise CorpusParseError(f"non-integer {column} {cell!r}", str(path), line)


def _parse_keys(frame: pd.DataFrame, path: Path) -> list[tuple[int, int, int]]:
    keys = []
    for row, values in enumerate(frame.iloc[1:, :3].itertuples(index=False), start=2):
        keys.append(
            tuple(
                _parse_int(cell, column, path, row)
                for cell, column in zip(values, KEY_COLUMNS)
            )
        )
    return keys


def _parse_floats(frame: pd.DataFrame, path: Path) -> np.ndarray:
    cells = frame.iloc[1:, 3:].to_numpy()
    try:
        values = cells.astype(np.float64)
    except ValueError:
        values = None
    if values is not None and np.isfinite(values).all():
        return values
    for row, line_cells in enumerate(cells, start=2):
        try:
            parsed = line_cells.astype(np.float64)
        except ValueError:
            raise CorpusParseError("non-numeric feature cell", str(path), row)
        if not np.isfinite(parsed).all():
            raise CorpusParseError("non-finite feature value", str(path), row)
    raise CorpusParseError("non-numeric feature cell", str(path))


def read_feature_csv(
    feature_paths: Mapping[str, Path],
    labels_path: Path,
    *,
    num_emotions: int,
    num_speakers: int | None = None,
) -> DialogueCorpus:
    """
    Parse one feature file per modality plus the labels file.

    Without `num_speakers` the registry is inferred as 0..max(speaker_id).
    """
    if not feature_paths:
        raise DataError("At least one modality feature file is required")
    labels_path = Path(labels_path)
    labels = _read_rows(labels_path)
    _check_header(labels, LABEL_COLUMNS, labels_path)
    keys = _parse_keys(labels, labels_path)
    emotions = [
        _parse_int(cell, "emotion", labels_path, line)
        for line, cell in enumerate(labels.iloc[1:, 3], start=2)
    ]

    for line, ((_, _, speaker), emotion) in enumerate(zip(keys, emotions), start=2):
        if not 0 <= emotion < num_emotions:
            raise CorpusParseError(
                f"emotion {emotion} outside [0, {num_emotions})", str(labels_path), line
            )
        if speaker < 0 or (num_speakers is not None and speaker >= num_speakers):
            raise CorpusParseError(f"unknown speaker {speaker}", str(labels_path), line)

    features: dict[str, np.ndarray] = {}
    for modality, path in feature_paths.items():
        path = Path(path)
        frame = _read_rows(path)
        width = frame.shape[1] - len(KEY_COLUMNS)
        if width < 1:
            raise CorpusParseError("no feature columns", str(path), 1)
        _check_header(frame, KEY_COLUMNS + [f"f{i}" for i in range(width)], path)
        if len(frame) != len(labels):
            raise CorpusParseError(
                f"{len(frame) - 1} feature rows for {len(keys)} labels", str(path)
            )
        pairs = zip(_parse_keys(frame, path), keys)
        for line, (mine, theirs) in enumerate(pairs, start=2):
            if mine != theirs:
                raise CorpusParseError(
                    f"row key {mine} does not match labels key {theirs}",
                    str(path),
                    line,
                )
        features[modality] = _parse_floats(frame, path)

    dialogues: list[Dialogue] = []
    current: list[Utterance] = []
    current_id: int | None = None
    for i, (dialogue_id, utterance_idx, speaker) in enumerate(keys):
        line = i + 2
        if dialogue_id != current_id:
            if current_id is not None:
                if dialogue_id < current_id:
                    raise CorpusParseError(
                        f"dialogue {dialogue_id} out of order", str(labels_path), line
                    )
                dialogues.append(Dialogue(current_id, tuple(current)))
            current, current_id = [], dialogue_id
        if utterance_idx != len(current):
            raise CorpusParseError(
                f"utterance_idx {utterance_idx}, expected {len(current)}",
                str(labels_path),
                line,
            )
        current.append(
            Utterance(
                speaker_id=speaker,
                emotion=emotions[i],
                features={m: values[i].copy() for m, values in features.items()},
                position=utterance_idx,
            )
        )
    assert current_id is not None
    dialogues.append(Dialogue(current_id, tuple(current)))

    registry = num_speakers if num_speakers is not None else max(k[2] for k in keys) + 1
    corpus = DialogueCorpus(
        dialogues=dialogues,
        modality_dims={m: v.shape[1] for m, v in features.items()},
        num_emotions=num_emotions,
        num_speakers=registry,
    )
    logger.debug(
        "Read %s dialogues (%s utterances) from %s",
        len(dialogues),
        len(keys),
        labels_path.parent,
    )
    return corpus


def write_feature_csv(corpus: DialogueCorpus, modality: str, path: Path) -> None:
    width = corpus.modality_dims[modality]
    frame = pd.DataFrame(_key_rows(corpus), columns=KEY_COLUMNS)
    values = pd.DataFrame(
        corpus.features(modality), columns=[f"f{i}" for i in range(width)]
    )
    _to_csv(pd.concat([frame, values], axis=1), path)


def write_labels_csv(corpus: DialogueCorpus, path: Path) -> None:
    frame = pd.DataFrame(_key_rows(corpus), columns=KEY_COLUMNS)
    frame["emotion"] = corpus.labels()
    _to_csv(frame, path)


def _key_rows(corpus: DialogueCorpus) -> list[tuple[int, int, int]]:
    return [
        (d.dialogue_id, u.position, u.speaker_id) for d in corpus.dialogues for u in d
    ]


def _to_csv(frame: pd.DataFrame, path: Path) -> None:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as err:
        raise DataError(f"{path}: {err.strerror or err}") from err


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as err:
        raise DataError(f"{path}: {err.strerror or err}") from err


def write_corpus(corpus: DialogueCorpus, out_dir: Path) -> list[Path]:
    """Write every file of a corpus directory; returns the written paths."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise DataError(f"{out_dir}: {err.strerror or err}") from err

    written = []
    for modality in corpus.modalities:
        path = out_dir / feature_file(modality)
        write_feature_csv(corpus, modality, path)
        written.append(path)
    write_labels_csv(corpus, out_dir / LABELS_FILE)
    written.append(out_dir / LABELS_FILE)

    manifest = CorpusManifest(
        num_emotions=corpus.num_emotions,
        num_speakers=corpus.num_speakers,
        modality_dims=corpus.modality_dims,
        synthetic=corpus.is_synthetic,
    )
    _write_text(out_dir / MANIFEST_FILE, manifest.model_dump_json(indent=2))
    written.append(out_dir / MANIFEST_FILE)
    if corpus.truth is not None:
        profiles = _profiles_adapter.dump_json(corpus.truth.profiles, indent=2)
        _write_text(out_dir / PROFILES_FILE, profiles.decode("utf-8"))
        _write_text(out_dir / TRUTH_FILE, corpus.truth.model_dump_json(indent=2))
        written += [out_dir / PROFILES_FILE, out_dir / TRUTH_FILE]
    logger.info("Wrote corpus to %s", out_dir, files=len(written))
    return written


def _read_model(path: Path, model: type[BaseModel]) -> BaseModel:
    try:
        return model.model_validate_json(path.read_bytes())
    except OSError as err:
        raise DataError(f"{path}: {err.strerror or err}") from err
    except ValidationError as err:
        raise DataError(f"{path}: invalid {model.__name__}: {err}") from err


def load_corpus(corpus_dir: Path) -> DialogueCorpus:
    corpus_dir = Path(corpus_dir)
    manifest = _read_model(corpus_dir / MANIFEST_FILE, CorpusManifest)
    assert isinstance(manifest, CorpusManifest)
    corpus = read_feature_csv(
        {m: corpus_dir / feature_file(m) for m in manifest.modality_dims},
        corpus_dir / LABELS_FILE,
        num_emotions=manifest.num_emotions,
        num_speakers=manifest.num_speakers,
    )
    if corpus.modality_dims != manifest.modality_dims:
        raise DataError(
            f"{corpus_dir}: feature widths {corpus.modality_dims} do not match "
            f"the manifest {manifest.modality_dims}"
        )
    truth_path = corpus_dir / TRUTH_FILE
    if manifest.synthetic and truth_path.exists():
        truth = _read_model(truth_path, GenerativeTruth)
        assert isinstance(truth, GenerativeTruth)
        corpus.truth = truth
    return corpus
