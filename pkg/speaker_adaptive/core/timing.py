import functools
import time
from contextlib import contextmanager
from typing import Callable, Generator, ParamSpec, TypeVar

import structlog

logger = structlog.getLogger(__name__)

P = ParamSpec("P")
T = TypeVar("T")


class Stopwatch:
    """Wall-clock accumulator; `elapsed` grows each time a block exits."""

    def __init__(self) -> None:
        self._start: float | None = None
        self.elapsed = 0.0

    def __enter__(self) -> "Stopwatch":
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        assert self._start is not None
        self.elapsed += time.perf_counter() - self._start
        self._start = None


@contextmanager
def timed(label: str) -> Generator[Stopwatch, None, None]:
    with Stopwatch() as watch:
        yield watch
    logger.debug("%s took %.4f seconds", label, watch.elapsed, elapsed_s=watch.elapsed)


def log_timing(func: Callable[P, T]) -> Callable[P, T]:
    """Decorator that logs execution time of a function to debug logger."""

    @functools.wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
        with timed(func.__qualname__):
            return func(*args, **kwargs)

    return wrapper
