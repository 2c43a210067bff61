class DimensionError(ValueError):
    """Operand shapes do not compose."""


class GraphStateError(RuntimeError):
    pass


class ContractError(ValueError):
    pass


class DeterminismError(RuntimeError):
    pass


class ConfigError(ValueError):
    def __init__(self, message: str, key_path: str | None = None) -> None:
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)


class DataError(Exception):
    pass


class CorpusParseError(DataError):
    def __init__(self, message: str, path: str, line: int | None = None) -> None:
        self.path = path
        self.line = line
        location = f"{path}:{line}" if line is not None else path
        super().__init__(f"{location}: {message}")


class EmptyCorpusError(DataError):
    pass


class SplitError(DataError):
    pass


class CheckpointError(Exception):
    pass


class NumericalError(Exception):
    def __init__(
        self,
        message: str,
        *,
        parameter: str | None = None,
        epoch: int | None = None,
        batch: int | None = None,
    ) -> None:
        self.parameter = parameter
        self.epoch = epoch
        self.batch = batch
        where = ", ".join(
            f"{k}={v}"
            for k, v in (("parameter", parameter), ("epoch", epoch), ("batch", batch))
            if v is not None
        )
        super().__init__(f"{message} ({where})" if where else message)


class UndefinedMetricError(ValueError):
    pass
