import contextvars
import logging
import sys
import uuid

import structlog
from structlog.typing import EventDict, Processor

from speaker_adaptive.core.config import settings

run_id_context: contextvars.ContextVar[str | None] = contextvars.ContextVar(
    "run_id", default=None
)


def get_run_id() -> str:
    return run_id_context.get() or "-"


def new_run_id() -> str:
    run_id = uuid.uuid4().hex[:12]
    run_id_context.set(run_id)
    return run_id


def add_logger_name_safe(logger, method_name: str, event_dict: EventDict) -> EventDict:
    """Logger name for structlog and plain stdlib records alike."""
    if logger:
        event_dict["logger"] = logger.name
    elif (record := event_dict.get("_record")) is not None:
        event_dict["logger"] = record.name
    return event_dict


def _shared_processors() -> list[Processor]:
    return [
        structlog.contextvars.merge_contextvars,
        add_logger_name_safe,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        # parallel experiment runs log from pool workers
        structlog.processors.CallsiteParameterAdder(
            [structlog.processors.CallsiteParameter.PROCESS]
        ),
        structlog.processors.dict_tracebacks,
    ]


def _renderers(json_lines: bool) -> list[Processor]:
    if json_lines:
        return [
            structlog.processors.format_exc_info,
            structlog.processors.JSONRenderer(),
        ]
    return [structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty())]


def setup_logging(log_level: str | int = logging.INFO) -> None:
    """
    Route structlog and stdlib logging through one stderr handler.

    Console rendering by default, JSON lines when LOG_FORMAT=json or in production.
    Called once by the command line entry point and once in every pool worker.
    """
    shared = _shared_processors()
    json_lines = settings.ENVIRONMENT == "production" or settings.LOG_FORMAT == "json"

    structlog.configure(
        processors=[*shared, structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )
    formatter = structlog.stdlib.ProcessorFormatter(
        foreign_pre_chain=shared,
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            *_renderers(json_lines),
        ],
    )

    # stdout stays free for the command summaries
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.handlers = [handler]
    root_logger.setLevel(log_level)


def bind_run_context(**values: object) -> None:
    """Bind run-scoped keys such as ablation and seed to every following log line."""
    structlog.contextvars.bind_contextvars(run_id=get_run_id(), **values)


def clear_run_context() -> None:
    structlog.contextvars.clear_contextvars()
