"""
Versioned experiment reports and the flat CSV tables written next to them.
"""

from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field

from speaker_adaptive.data.corpus import DialogueCorpus
from speaker_adaptive.data.oracle import bayes_oracle
from speaker_adaptive.defaults import REPORT_VERSION
from speaker_adaptive.enums import Ablation, Split
from speaker_adaptive.evaluation.metrics import (
    accuracy,
    macro_f1,
    majority_baseline,
    per_class_f1,
    weighted_f1,
)
from speaker_adaptive.evaluation.predict import Predictions
from speaker_adaptive.exceptions import DataError
from speaker_adaptive.result import ErrorType
from speaker_adaptive.training.checkpoint import Checkpoint, EpochRecord

logger = structlog.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
REPORT_FILE = "report.json"


class SummaryStats(BaseModel):
    mean: float
    std: float
    min: float
    max: float

    @classmethod
    def of(cls, values: np.ndarray) -> "SummaryStats":
        return cls(
            mean=float(values.mean()),
            std=float(values.std()),
            min=float(values.min()),
            max=float(values.max()),
        )


class ModulationStats(BaseModel):
    gamma: SummaryStats
    beta: SummaryStats


class RunReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    report_version: str = REPORT_VERSION
    label: str
    ablation: Ablation
    lambda_spk: float
    seed: int
    split: Split
    utterances: int
    weighted_f1: float
    macro_f1: float
    accuracy: float
    per_class_f1: list[float]
    confusion_matrix: list[list[int]]
    majority_weighted_f1: float
    oracle_accuracy: float | None = None
    oracle_dominates: bool | None = None
    # modality -> speaker id -> mean gate activation
    gate_means: dict[str, dict[str, float]]
    # modality -> "speaker:emotion" -> mean gate activation
    gate_means_by_emotion: dict[str, dict[str, float]]
    modulation: dict[str, ModulationStats]
    epochs_trained: int | None = None
    best_epoch: int | None = None
    best_val_weighted_f1: float | None = None
    stopped_early: bool | None = None


class SeedAggregate(BaseModel):
    n: int
    mean: float
    # sample standard deviation, absent for a single seed
    std: float | None
    values: list[float]


class RunFailure(BaseModel):
    label: str
    seed: int
    error_type: ErrorType
    message: str


class AblationRow(BaseModel):
    ablation: Ablation
    weighted_f1: SeedAggregate
    macro_f1: SeedAggregate
    accuracy: SeedAggregate
    # mean(this) - mean(full); negative is a drop
    delta_vs_full: float | None
    # per seed weighted F1 of full minus this configuration
    paired_advantage_of_full: list[float]
    full_wins: int


class AblationReport(BaseModel):
    report_version: str = REPORT_VERSION
    kind: str = "ablation"
    seeds: list[int]
    lambda_spk: float
    rows: list[AblationRow]
    runs: list[RunReport] = Field(default_factory=list)
    failures: list[RunFailure] = Field(default_factory=list)

    def row(self, ablation: Ablation) -> AblationRow:
        return next(r for r in self.rows if r.ablation == ablation)


class SweepRow(BaseModel):
    lambda_spk: float
    weighted_f1: SeedAggregate
    macro_f1: SeedAggregate


class SweepReport(BaseModel):
    report_version: str = REPORT_VERSION
    kind: str = "sweep"
    seeds: list[int]
    rows: list[SweepRow]
    peak_lambda: float | None
    runs: list[RunReport] = Field(default_factory=list)
    failures: list[RunFailure] = Field(default_factory=list)


def aggregate_seeds(values: Sequence[float]) -> SeedAggregate:
    """Arithmetic mean and (n-1) standard deviation of per-seed metrics."""
    array = np.asarray(values, dtype=np.float64)
    if array.size == 0:
        raise ValueError("Cannot aggregate an empty list of seed results")
    return SeedAggregate(
        n=int(array.size),
        mean=float(array.mean()),
        std=float(array.std(ddof=1)) if array.size > 1 else None,
        values=array.tolist(),
    )


def paired_deltas(first: Sequence[float], second: Sequence[float]) -> list[float]:
    if len(first) != len(second):
        raise ValueError(f"Cannot pair {len(first)} with {len(second)} seed results")
    return [a - b for a, b in zip(first, second)]


def _gate_diagnostics(
    predictions: Predictions,
) -> tuple[dict[str, dict[str, float]], dict[str, dict[str, float]]]:
    by_speaker: dict[str, dict[str, float]] = {}
    by_pair: dict[str, dict[str, float]] = {}
    for modality, gates in predictions.gates.items():
        per_utterance = gates.mean(axis=1)
        by_speaker[modality] = {
            str(s): float(per_utterance[predictions.speaker_ids == s].mean())
            for s in np.unique(predictions.speaker_ids)
        }
        pairs = {}
        for s in np.unique(predictions.speaker_ids):
            for e in np.unique(predictions.labels):
                mask = (predictions.speaker_ids == s) & (predictions.labels == e)
                if mask.any():
                    pairs[f"{s}:{e}"] = float(per_utterance[mask].mean())
        by_pair[modality] = pairs
    return by_speaker, by_pair


def build_run_report(
    predictions: Predictions,
    corpus: DialogueCorpus,
    *,
    label: str,
    ablation: Ablation,
    lambda_spk: float,
    seed: int,
    split: Split,
    checkpoint: Checkpoint | None = None,
) -> RunReport:
    cm = predictions.confusion(corpus.num_emotions)
    model_accuracy = accuracy(cm)
    oracle_accuracy = bayes_oracle(corpus) if corpus.is_synthetic else None
    dominates = None
    if oracle_accuracy is not None:
        dominates = oracle_accuracy >= model_accuracy
        if not dominates:
            logger.warning(
                "Model accuracy %.4f exceeds the Bayes oracle %.4f",
                model_accuracy,
                oracle_accuracy,
                label=label,
            )
    gate_means, gate_pairs = _gate_diagnostics(predictions)
    return RunReport(
        label=label,
        ablation=ablation,
        lambda_spk=lambda_spk,
        seed=seed,
        split=split,
        utterances=cm.total,
        weighted_f1=weighted_f1(cm),
        macro_f1=macro_f1(cm),
        accuracy=model_accuracy,
        per_class_f1=per_class_f1(cm).tolist(),
        confusion_matrix=cm.tolist(),
        majority_weighted_f1=weighted_f1(
            majority_baseline(predictions.labels, corpus.num_emotions)
        ),
        oracle_accuracy=oracle_accuracy,
        oracle_dominates=dominates,
        gate_means=gate_means,
        gate_means_by_emotion=gate_pairs,
        modulation={
            m: ModulationStats(
                gamma=SummaryStats.of(predictions.gammas[m]),
                beta=SummaryStats.of(predictions.betas[m]),
            )
            for m in predictions.gammas
        },
        epochs_trained=checkpoint.epoch if checkpoint else None,
        best_epoch=checkpoint.best_epoch if checkpoint else None,
        best_val_weighted_f1=checkpoint.best_val_weighted_f1 if checkpoint else None,
        stopped_early=checkpoint.stopped_early if checkpoint else None,
    )


def _write(path: Path, write) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        write(path)
    except OSError as err:
        raise DataError(f"{path}: {err.strerror or err}") from err
    return path


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    return _write(
        path,
        lambda p: frame.to_csv(
            p, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        ),
    )


def write_json(model: BaseModel, path: Path) -> Path:
    text = model.model_dump_json(indent=2, by_alias=True)
    return _write(path, lambda p: p.write_text(text + "\n", encoding="utf-8"))


def write_curve(curve: Sequence[EpochRecord], path: Path) -> Path:
    columns = list(EpochRecord.model_fields)
    frame = pd.DataFrame([r.model_dump() for r in curve], columns=columns)
    return write_table(frame, path)


def write_run_report(report: RunReport, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    labels = list(range(len(report.confusion_matrix)))
    confusion = pd.DataFrame(
        report.confusion_matrix, columns=[f"pred_{k}" for k in labels]
    )
    confusion.insert(0, "true", labels)
    gates = pd.DataFrame(
        [
            {"modality": m, "speaker_id": int(s), "mean_gate": value}
            for m, per_speaker in report.gate_means.items()
            for s, value in per_speaker.items()
        ],
        columns=["modality", "speaker_id", "mean_gate"],
    )
    return [
        write_json(report, out_dir / REPORT_FILE),
        write_table(confusion, out_dir / "confusion_matrix.csv"),
        write_table(gates, out_dir / "gates.csv"),
    ]


def write_ablation_report(report: AblationReport, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    frame = pd.DataFrame(
        [
            {
                "ablation": row.ablation.value,
                "n": row.weighted_f1.n,
                "weighted_f1_mean": row.weighted_f1.mean,
                "weighted_f1_std": row.weighted_f1.std,
                "delta_vs_full": row.delta_vs_full,
                "macro_f1_mean": row.macro_f1.mean,
                "macro_f1_std": row.macro_f1.std,
                "accuracy_mean": row.accuracy.mean,
                "full_wins": row.full_wins,
            }
            for row in report.rows
        ]
    )
    return [
        write_json(report, out_dir / REPORT_FILE),
        write_table(frame, out_dir / "ablation.csv"),
    ]


def write_sweep_report(report: SweepReport, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    frame = pd.DataFrame(
        [
            {
                "lambda": row.lambda_spk,
                "n": row.weighted_f1.n,
                "weighted_f1_mean": row.weighted_f1.mean,
                "weighted_f1_std": row.weighted_f1.std,
                "macro_f1_mean": row.macro_f1.mean,
                "macro_f1_std": row.macro_f1.std,
            }
            for row in report.rows
        ]
    )
    return [
        write_json(report, out_dir / REPORT_FILE),
        write_table(frame, out_dir / "sweep.csv"),
    ]
