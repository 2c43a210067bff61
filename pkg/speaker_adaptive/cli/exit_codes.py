from speaker_adaptive.result import ErrorType

EXIT_OK = 0
EXIT_GRADCHECK = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_CRITICAL = 5

FAILURE_EXIT_CODES = {
    ErrorType.CONFIG: EXIT_CONFIG,
    ErrorType.DATA: EXIT_DATA,
    ErrorType.NUMERICAL: EXIT_NUMERICAL,
    ErrorType.CRITICAL: EXIT_CRITICAL,
}
