"""
Multi-run experiments: ablations and lambda sweeps over paired seeds.

Every configuration of an experiment sees the same splits and the same per-seed
initialization, so per-seed differences isolate the configuration.
"""

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from typing import Sequence

import structlog
from pydantic import BaseModel, ConfigDict

from speaker_adaptive.core.config import settings
from speaker_adaptive.core.logging_utils import (
    clear_run_context,
    new_run_id,
    setup_logging,
)
from speaker_adaptive.core.timing import log_timing
from speaker_adaptive.data.split import CorpusSplits
from speaker_adaptive.defaults import DEFAULT_LAMBDA_GRID
from speaker_adaptive.enums import Ablation, Split
from speaker_adaptive.evaluation.predict import predict
from speaker_adaptive.evaluation.report import (
    AblationReport,
    AblationRow,
    RunFailure,
    RunReport,
    SweepReport,
    SweepRow,
    aggregate_seeds,
    build_run_report,
    paired_deltas,
)
from speaker_adaptive.exceptions import ConfigError
from speaker_adaptive.result import Err, ErrorType, Ok, Result, is_ok
from speaker_adaptive.training.config import TrainConfig
from speaker_adaptive.training.trainer import train

logger = structlog.getLogger(__name__)

MIN_ABLATION_SEEDS = 3


class RunSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    train: TrainConfig
    split: Split = Split.TEST


def _check_seeds(seeds: Sequence[int]) -> None:
    if not seeds:
        raise ConfigError("At least one seed is required", key_path="seeds")
    # runs are keyed by seed
    repeated = sorted(s for s, count in Counter(seeds).items() if count > 1)
    if repeated:
        raise ConfigError(
            f"Seeds must be distinct, repeated: {repeated}", key_path="seeds"
        )


def execute_run(splits: CorpusSplits, spec: RunSpec) -> Result[RunReport, RunFailure]:
    """Train one configuration and evaluate its best parameters on `spec.split`."""
    new_run_id()
    config = spec.train
    try:
        checkpoint, _ = train(splits, config)
        corpus = splits[spec.split]
        predictions = predict(
            checkpoint.best_params, corpus, config.ablation, config.batch_size
        )
        report = build_run_report(
            predictions,
            corpus,
            label=spec.label,
            ablation=config.ablation,
            lambda_spk=config.lambda_spk,
            seed=config.seed,
            split=spec.split,
            checkpoint=checkpoint,
        )
    except Exception as err:
        logger.error("Run %s (seed %s) failed: %s", spec.label, config.seed, err)
        return Err(
            RunFailure(
                label=spec.label,
                seed=config.seed,
                error_type=ErrorType.of(err),
                message=str(err),
            )
        )
    finally:
        clear_run_context()
    logger.info(
        "Run %s (seed %s): weighted F1 %.4f",
        spec.label,
        config.seed,
        report.weighted_f1,
    )
    return Ok(report)


def run_jobs(
    splits: CorpusSplits, specs: Sequence[RunSpec], jobs: int = 1
) -> list[Result[RunReport, RunFailure]]:
    """Results come back in the order of `specs` whatever the completion order."""
    if jobs <= 1 or len(specs) <= 1:
        return [execute_run(splits, spec) for spec in specs]
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=setup_logging, initargs=(settings.LOG_LEVEL,)
    ) as pool:
        futures = [pool.submit(execute_run, splits, spec) for spec in specs]
        return [future.result() for future in futures]


def _partition(
    results: Sequence[Result[RunReport, RunFailure]],
) -> tuple[list[RunReport], list[RunFailure]]:
    reports, failures = [], []
    for result in results:
        if is_ok(result):
            reports.append(result.value)
        else:
            failures.append(result.error)
    return reports, failures


def _by_seed(reports: Sequence[RunReport], label: str) -> dict[int, RunReport]:
    return {r.seed: r for r in reports if r.label == label}


@log_timing
def run_ablation(
    splits: CorpusSplits,
    base: TrainConfig,
    seeds: Sequence[int],
    jobs: int = 1,
) -> AblationReport:
    """Train every ablation per seed; failed runs are listed instead of aborting."""
    _check_seeds(seeds)
    if len(seeds) < MIN_ABLATION_SEEDS:
        logger.warning(
            "Ablation with %s seeds; paired deltas need at least %s to be meaningful",
            len(seeds),
            MIN_ABLATION_SEEDS,
        )
    specs = [
        RunSpec(
            label=ablation.value,
            train=base.model_copy(update={"ablation": ablation, "seed": seed}),
        )
        for seed in seeds
        for ablation in Ablation
    ]
    reports, failures = _partition(run_jobs(splits, specs, jobs))

    full = _by_seed(reports, Ablation.FULL.value)
    full_mean = (
        aggregate_seeds([r.weighted_f1 for r in full.values()]).mean if full else None
    )
    rows = []
    for ablation in Ablation:
        runs = _by_seed(reports, ablation.value)
        if not runs:
            continue
        ordered = [runs[s] for s in seeds if s in runs]
        wf1 = aggregate_seeds([r.weighted_f1 for r in ordered])
        paired = [s for s in seeds if s in runs and s in full]
        advantage = paired_deltas(
            [full[s].weighted_f1 for s in paired], [runs[s].weighted_f1 for s in paired]
        )
        rows.append(
            AblationRow(
                ablation=ablation,
                weighted_f1=wf1,
                macro_f1=aggregate_seeds([r.macro_f1 for r in ordered]),
                accuracy=aggregate_seeds([r.accuracy for r in ordered]),
                delta_vs_full=None if full_mean is None else wf1.mean - full_mean,
                paired_advantage_of_full=advantage,
                full_wins=sum(d > 0 for d in advantage),
            )
        )
    return AblationReport(
        seeds=list(seeds),
        lambda_spk=base.lambda_spk,
        rows=rows,
        runs=reports,
        failures=failures,
    )


def sweep_label(lambda_spk: float) -> str:
    return f"lambda={lambda_spk:g}"


@log_timing
def lambda_sweep(
    splits: CorpusSplits,
    base: TrainConfig,
    seeds: Sequence[int],
    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    jobs: int = 1,
) -> SweepReport:
    """One full-model training per (lambda, seed)."""
    if not grid:
        raise ConfigError("The lambda grid is empty", key_path="evaluation.lambda_grid")
    if any(value < 0 for value in grid):
        raise ConfigError(
            "lambda values must be non-negative", key_path="evaluation.lambda_grid"
        )
    if len(set(grid)) != len(grid):
        raise ConfigError(
            "lambda values must be distinct", key_path="evaluation.lambda_grid"
        )
    _check_seeds(seeds)
    specs = [
        RunSpec(
            label=sweep_label(value),
            train=base.model_copy(
                update={"ablation": Ablation.FULL, "lambda_spk": value, "seed": seed}
            ),
        )
        for value in grid
        for seed in seeds
    ]
    reports, failures = _partition(run_jobs(splits, specs, jobs))

    rows = []
    for value in grid:
        runs = _by_seed(reports, sweep_label(value))
        ordered = [runs[s] for s in seeds if s in runs]
        if not ordered:
            continue
        rows.append(
            SweepRow(
                lambda_spk=value,
                weighted_f1=aggregate_seeds([r.weighted_f1 for r in ordered]),
                macro_f1=aggregate_seeds([r.macro_f1 for r in ordered]),
            )
        )
    peak = max(rows, key=lambda row: row.weighted_f1.mean) if rows else None
    return SweepReport(
        seeds=list(seeds),
        rows=rows,
        peak_lambda=peak.lambda_spk if peak else None,
        runs=reports,
        failures=failures,
    )
