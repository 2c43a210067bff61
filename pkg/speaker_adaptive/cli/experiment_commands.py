from pathlib import Path

import structlog

from speaker_adaptive.cli.exit_codes import (
    EXIT_GRADCHECK,
    EXIT_OK,
    FAILURE_EXIT_CODES,
)
from speaker_adaptive.cli.run_config import RunConfig, persist_effective_config
from speaker_adaptive.data.io import load_corpus
from speaker_adaptive.data.split import CorpusSplits, split_corpus
from speaker_adaptive.enums import Split
from speaker_adaptive.evaluation.experiments import lambda_sweep, run_ablation
from speaker_adaptive.evaluation.report import (
    RunFailure,
    write_ablation_report,
    write_sweep_report,
)
from speaker_adaptive.gradcheck import run_gradcheck_suite

logger = structlog.getLogger(__name__)


def _splits(config: RunConfig, corpus_dir: Path) -> CorpusSplits:
    splits = split_corpus(
        load_corpus(corpus_dir),
        config.evaluation.split_fractions,
        config.evaluation.split_seed,
    )
    splits.require(Split.TEST)
    return splits


def _failure_code(failures: list[RunFailure]) -> int:
    """0 without failures; otherwise the code of the first failed run."""
    for failure in failures:
        print(f"  FAILED {failure.label} seed {failure.seed}: {failure.message}")
    return FAILURE_EXIT_CODES[failures[0].error_type] if failures else EXIT_OK


def _fmt(mean: float, std: float | None) -> str:
    return f"{mean:.4f} ± {std:.4f}" if std is not None else f"{mean:.4f}"


def cmd_ablate(config: RunConfig, corpus_dir: Path, out_dir: Path) -> int:
    out_dir = Path(out_dir)
    persist_effective_config(config, out_dir)
    report = run_ablation(
        _splits(config, corpus_dir), config.train, config.seeds, jobs=config.jobs
    )
    write_ablation_report(report, out_dir)
    print(f"Ablation over seeds {config.seeds} (lambda={config.train.lambda_spk:g})")
    for row in report.rows:
        delta = "" if row.delta_vs_full is None else f"  Δ {row.delta_vs_full:+.4f}"
        print(
            f"  {row.ablation.value:<8} W-F1 "
            f"{_fmt(row.weighted_f1.mean, row.weighted_f1.std)}{delta}"
            f"  full wins {row.full_wins}/{len(row.paired_advantage_of_full)}"
        )
    return _failure_code(report.failures)


def cmd_sweep(config: RunConfig, corpus_dir: Path, out_dir: Path) -> int:
    out_dir = Path(out_dir)
    persist_effective_config(config, out_dir)
    report = lambda_sweep(
        _splits(config, corpus_dir),
        config.train,
        config.seeds,
        grid=config.evaluation.lambda_grid,
        jobs=config.jobs,
    )
    write_sweep_report(report, out_dir)
    print(f"Lambda sweep over seeds {config.seeds}")
    for row in report.rows:
        print(
            f"  lambda={row.lambda_spk:<5g} W-F1 "
            f"{_fmt(row.weighted_f1.mean, row.weighted_f1.std)}"
        )
    if report.peak_lambda is not None:
        print(f"  peak at lambda={report.peak_lambda:g}")
    return _failure_code(report.failures)


def cmd_gradcheck(seed: int, step: float, tolerance: float) -> int:
    results = run_gradcheck_suite(seed=seed, step=step, tolerance=tolerance)
    for result in results:
        status = "ok" if result.passed else "FAIL"
        print(
            f"  {status:<4} {result.name:<22} max rel. error "
            f"{result.max_relative_error:.3e} ({result.checked} scalars)"
        )
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(results)} gradient checks failed")
        return EXIT_GRADCHECK
    print(f"All {len(results)} gradient checks passed")
    return EXIT_OK
