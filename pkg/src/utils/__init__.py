"""Utils module initialization."""

from .exceptions import (
    CheckpointCompatibilityError,
    CheckpointFormatError,
    ConfigError,
    ContractError,
    DatasetParseError,
    DimensionError,
    FmtError,
    NumericalError,
    RecordValidationError,
    UndefinedMetricError,
    VocabularyError,
)
from .logger import setup_logger
from .validators import check_finite, check_width

__all__ = [
    "setup_logger",
    "check_finite",
    "check_width",
    "FmtError",
    "DimensionError",
    "VocabularyError",
    "ContractError",
    "NumericalError",
    "ConfigError",
    "DatasetParseError",
    "RecordValidationError",
    "UndefinedMetricError",
    "CheckpointFormatError",
    "CheckpointCompatibilityError",
]
