from pathlib import Path

import structlog

from speaker_adaptive.cli.run_config import RunConfig, persist_effective_config
from speaker_adaptive.data.io import load_corpus
from speaker_adaptive.data.split import split_corpus
from speaker_adaptive.enums import Split
from speaker_adaptive.evaluation.embeddings import dump_embeddings
from speaker_adaptive.evaluation.predict import predict
from speaker_adaptive.evaluation.report import (
    RunReport,
    build_run_report,
    write_curve,
    write_run_report,
)
from speaker_adaptive.exceptions import DataError
from speaker_adaptive.training.checkpoint import (
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from speaker_adaptive.training.trainer import model_config_for, train

logger = structlog.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.npz"
CURVE_FILE = "curve.csv"


def _print_report(report: RunReport) -> None:
    print(f"{report.label} on {report.split.value} ({report.utterances} utterances)")
    print(f"  weighted F1: {report.weighted_f1:.4f}")
    print(f"  macro F1:    {report.macro_f1:.4f}")
    print(f"  accuracy:    {report.accuracy:.4f}")
    print(f"  majority-class weighted F1: {report.majority_weighted_f1:.4f}")
    if report.oracle_accuracy is not None:
        print(f"  Bayes oracle accuracy: {report.oracle_accuracy:.4f}")


def _evaluate(
    checkpoint: Checkpoint, config: RunConfig, corpus_dir: Path, split: Split
) -> RunReport:
    corpus = load_corpus(corpus_dir)
    expected = model_config_for(corpus, checkpoint.train_config)
    if expected != checkpoint.model_config:
        raise DataError(
            f"{corpus_dir}: corpus dimensions do not match the checkpoint "
            f"(corpus {expected.modality_dims}, {expected.num_speakers} speakers, "
            f"{expected.num_emotions} emotions; checkpoint "
            f"{checkpoint.model_config.modality_dims}, "
            f"{checkpoint.model_config.num_speakers} speakers, "
            f"{checkpoint.model_config.num_emotions} emotions)"
        )
    splits = split_corpus(
        corpus, config.evaluation.split_fractions, config.evaluation.split_seed
    )
    evaluated = splits.require(split)
    train_config = checkpoint.train_config
    predictions = predict(
        checkpoint.best_params,
        evaluated,
        train_config.ablation,
        train_config.batch_size,
    )
    return build_run_report(
        predictions,
        evaluated,
        label=train_config.ablation.value,
        ablation=train_config.ablation,
        lambda_spk=train_config.lambda_spk,
        seed=train_config.seed,
        split=split,
        checkpoint=checkpoint,
    )


def cmd_train(
    config: RunConfig,
    corpus_dir: Path,
    out_dir: Path,
    resume: Path | None = None,
) -> int:
    out_dir = Path(out_dir)
    persist_effective_config(config, out_dir)
    corpus = load_corpus(corpus_dir)
    splits = split_corpus(
        corpus, config.evaluation.split_fractions, config.evaluation.split_seed
    )
    splits.require(Split.TEST)
    previous = load_checkpoint(resume) if resume is not None else None
    checkpoint, curve = train(splits, config.train, resume=previous)
    save_checkpoint(checkpoint, out_dir / CHECKPOINT_FILE)
    write_curve(curve, out_dir / CURVE_FILE)
    report = _evaluate(checkpoint, config, corpus_dir, Split.TEST)
    write_run_report(report, out_dir)
    print(
        f"Checkpoint written to {out_dir / CHECKPOINT_FILE} (epoch {checkpoint.epoch})"
    )
    _print_report(report)
    return 0


def cmd_evaluate(
    config: RunConfig,
    checkpoint_path: Path,
    corpus_dir: Path,
    out_dir: Path,
    split: Split = Split.TEST,
    embeddings: Path | None = None,
) -> int:
    out_dir = Path(out_dir)
    persist_effective_config(config, out_dir)
    checkpoint = load_checkpoint(checkpoint_path)
    report = _evaluate(checkpoint, config, corpus_dir, split)
    write_run_report(report, out_dir)
    if embeddings is not None:
        splits = split_corpus(
            load_corpus(corpus_dir),
            config.evaluation.split_fractions,
            config.evaluation.split_seed,
        )
        dump_embeddings(checkpoint, splits[split], embeddings)
    _print_report(report)
    return 0
