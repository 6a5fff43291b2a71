"""
Exception hierarchy for FMT Desk.

Every error raised by the library derives from FmtError so callers (the CLI in
particular) can map failures to exit codes in one place.
"""

from typing import Optional, Sequence


class FmtError(Exception):
    """Base class for all FMT Desk errors."""


class DimensionError(FmtError, ValueError):
    """Tensor shapes do not agree."""

    def __init__(self, message: str, *shapes: Sequence[int]):
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)
        self.shapes = [tuple(s) for s in shapes]


class VocabularyError(FmtError, ValueError):
    """A token, segment or position id falls outside its table."""

    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (offending index {index})")
        self.index = index


class ContractError(FmtError, ValueError):
    """A caller violated an operation's precondition."""


class NumericalError(FmtError, ArithmeticError):
    """A forward operation produced NaN or Inf from finite inputs."""


class ConfigError(FmtError, ValueError):
    """Configuration is invalid or inconsistent with the data or model."""


class DatasetParseError(FmtError, ValueError):
    """A dataset line could not be parsed."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class RecordValidationError(FmtError, ValueError):
    """A record violates the dataset invariants."""

    def __init__(self, message: str, record_id: Optional[str] = None):
        prefix = f"record {record_id!r}: " if record_id is not None else ""
        super().__init__(prefix + message)
        self.record_id = record_id


class UndefinedMetricError(FmtError, ZeroDivisionError):
    """A metric denominator is zero."""


class CheckpointFormatError(FmtError, ValueError):
    """A checkpoint file is truncated, corrupt, or of an unknown version."""


class CheckpointCompatibilityError(FmtError, ValueError):
    """A checkpoint does not fit the requested model configuration."""

    def __init__(self, message: str, tensor_name: Optional[str] = None):
        super().__init__(message)
        self.tensor_name = tensor_name
