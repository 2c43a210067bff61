from enum import StrEnum, auto
from typing import Generic, TypeVar, Union

from pydantic import ValidationError
from typing_extensions import TypeIs

from speaker_adaptive.exceptions import (
    CheckpointError,
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    NumericalError,
    UndefinedMetricError,
)

T = TypeVar("T")
E = TypeVar("E")

# inputs the model, a metric or the file layer cannot accept
DATA_ERRORS = (
    DataError,
    CheckpointError,
    ContractError,
    DimensionError,
    UndefinedMetricError,
    IndexError,
    OSError,
)


class ErrorType(StrEnum):
    CONFIG = auto()
    DATA = auto()
    NUMERICAL = auto()
    CRITICAL = auto()

    @classmethod
    def of(cls, err: BaseException) -> "ErrorType":
        if isinstance(err, (ConfigError, ValidationError)):
            return cls.CONFIG
        if isinstance(err, NumericalError):
            return cls.NUMERICAL
        if isinstance(err, DATA_ERRORS):
            return cls.DATA
        return cls.CRITICAL


class Ok(Generic[T]):
    def __init__(self, value: T) -> None:
        self.value = value

    def unwrap(self) -> T:
        return self.value


class Err(Generic[E]):
    __match_args__ = ("error",)

    def __init__(self, error: E) -> None:
        self.error = error


Result = Union[Ok[T], Err[E]]


def is_ok(result: Result[T, E]) -> TypeIs[Ok[T]]:
    return isinstance(result, Ok)
