"""Custom exception classes.

Every class carries the process exit code the CLI reports when the error
escapes a command.
"""


class SalRankException(Exception):
    """Base exception for the salrank package."""

    exit_code = 1


class InputError(SalRankException):
    """Raised when an input (file, spec, argument) is invalid."""

    exit_code = 2


class DimensionError(InputError):
    """Raised when map, box or tensor shapes disagree."""

    pass


class DomainError(InputError):
    """Raised when a scalar argument is outside its valid range."""

    pass


class EmptyInputError(InputError):
    """Raised when a non-empty collection was required."""

    pass


class IncompleteInputError(InputError):
    """Raised when a clip lacks per-frame data (annotations, fixations)."""

    pass


class SpecError(InputError):
    """Raised when a synthetic-data spec or config file is infeasible."""

    pass


class UndefinedMetricError(SalRankException):
    """Raised when a saliency metric is undefined for its inputs."""

    pass


class NumericDivergenceError(SalRankException):
    """Raised when training or sampling produces non-finite values."""

    exit_code = 3

    def __init__(self, message: str, last_finite_step: int = -1):
        super().__init__(message)
        self.last_finite_step = last_finite_step


class ParseError(SalRankException):
    """Raised when an MLLM response has no parsable ranking block."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class TransportError(SalRankException):
    """Raised when a remote MLLM or grounding call fails."""

    exit_code = 4
