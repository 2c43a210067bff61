import argparse
import sys
from pathlib import Path
from typing import Any, Sequence

import structlog

from speaker_adaptive.cli.corpus_commands import cmd_generate
from speaker_adaptive.cli.exit_codes import FAILURE_EXIT_CODES
from speaker_adaptive.cli.experiment_commands import (
    cmd_ablate,
    cmd_gradcheck,
    cmd_sweep,
)
from speaker_adaptive.cli.run_config import (
    EFFECTIVE_CONFIG_FILE,
    RunConfig,
    load_run_config,
    with_overrides,
)
from speaker_adaptive.cli.train_commands import cmd_evaluate, cmd_train
from speaker_adaptive.core.config import settings
from speaker_adaptive.core.logging_utils import new_run_id, setup_logging
from speaker_adaptive.enums import Ablation, Split
from speaker_adaptive.exceptions import ConfigError
from speaker_adaptive.result import ErrorType

logger = structlog.getLogger(__name__)

FAILURE_LABELS = {
    ErrorType.CONFIG: "Configuration error",
    ErrorType.DATA: "Data error",
    ErrorType.NUMERICAL: "Numerical abort",
    ErrorType.CRITICAL: "Internal error",
}


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, default=None, help="TOML or JSON config")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--jobs", type=int, default=None)
    return parser


def _model_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument(
        "--ablation", choices=[a.value for a in Ablation], default=None
    )
    parser.add_argument("--lambda", dest="lambda_spk", type=float, default=None)
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    model = _model_parser()
    parser = argparse.ArgumentParser(
        "san-experiment",
        description="Speaker-adaptive emotion recognition experiments",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("generate", parents=[common], help="Write a synthetic corpus")

    train = commands.add_parser("train", parents=[common, model], help="Train a model")
    train.add_argument("--corpus", type=Path, required=True)
    train.add_argument("--resume", type=Path, default=None)

    evaluate = commands.add_parser(
        "evaluate", parents=[common], help="Evaluate a checkpoint"
    )
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--corpus", type=Path, required=True)
    evaluate.add_argument(
        "--split", choices=[s.value for s in Split], default=Split.TEST.value
    )
    evaluate.add_argument("--embeddings", type=Path, default=None)

    for name, help_text in (
        ("ablate", "Full model against each ablation over paired seeds"),
        ("sweep", "Weighted F1 across the lambda grid"),
    ):
        command = commands.add_parser(name, parents=[common, model], help=help_text)
        command.add_argument("--corpus", type=Path, required=True)

    gradcheck = commands.add_parser(
        "gradcheck", help="Finite-difference check of every gradient rule"
    )
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.add_argument("--step", type=float, default=1e-5)
    gradcheck.add_argument("--tolerance", type=float, default=1e-4)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {
        "jobs": args.jobs,
        "out_dir": str(args.out) if args.out is not None else None,
    }
    if args.command == "evaluate" and args.out is None:
        overrides["out_dir"] = str(args.checkpoint.parent / f"evaluate_{args.split}")
    match args.command:
        case "generate":
            overrides["generator.seed"] = args.seed
        case "train" | "evaluate":
            overrides["train.seed"] = args.seed
        case "ablate" | "sweep":
            overrides["seeds"] = [args.seed] if args.seed is not None else None
    if "lambda_spk" in args:
        overrides["train.lambda"] = args.lambda_spk
        overrides["train.ablation"] = args.ablation
    return overrides


def _config_path(args: argparse.Namespace) -> Path | None:
    """Without --config, evaluate reuses the snapshot stored beside the checkpoint."""
    if args.config is not None or args.command != "evaluate":
        return args.config
    snapshot = args.checkpoint.parent / EFFECTIVE_CONFIG_FILE
    return snapshot if snapshot.is_file() else None


def effective_config(args: argparse.Namespace) -> RunConfig:
    return with_overrides(load_run_config(_config_path(args)), _overrides(args))


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "gradcheck":
        print(f"gradcheck: seed={args.seed} step={args.step:g} tol={args.tolerance:g}")
        return cmd_gradcheck(args.seed, args.step, args.tolerance)

    config = effective_config(args)
    print("Effective configuration:")
    print(config.to_json())
    out_dir = config.out_dir
    match args.command:
        case "generate":
            return cmd_generate(config, out_dir)
        case "train":
            return cmd_train(config, args.corpus, out_dir, resume=args.resume)
        case "evaluate":
            return cmd_evaluate(
                config,
                args.checkpoint,
                args.corpus,
                out_dir,
                split=Split(args.split),
                embeddings=args.embeddings,
            )
        case "ablate":
            return cmd_ablate(config, args.corpus, out_dir)
        case "sweep":
            return cmd_sweep(config, args.corpus, out_dir)
    raise ConfigError(f"Unknown command {args.command}")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(settings.LOG_LEVEL)
    run_id = new_run_id()
    logger.debug("Running %s", args.command, run_id=run_id)
    try:
        return _dispatch(args)
    except Exception as err:
        error_type = ErrorType.of(err)
        if error_type == ErrorType.CRITICAL:
            logger.exception("Unexpected failure in %s", args.command)
        print(f"{FAILURE_LABELS[error_type]}: {err}", file=sys.stderr)
        return FAILURE_EXIT_CODES[error_type]


if __name__ == "__main__":
    sys.exit(main())
