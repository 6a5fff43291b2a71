"""
Validation helpers shared by the numeric core, the model and the data layer.
"""

from typing import Sequence

import numpy as np

from src.utils.exceptions import DimensionError, NumericalError


def check_width(name: str, shape: Sequence[int], width: int) -> None:
    """
    Ensure a 2-D shape has the expected number of columns.

    Args:
        name: What is being checked (used in the error message)
        shape: Actual shape
        width: Expected last dimension
    """
    if len(shape) != 2 or shape[1] != width:
        raise DimensionError(f"{name} expects rows of width {width}", shape, (None, width))


def check_finite(name: str, values: np.ndarray) -> None:
    """Raise NumericalError if any entry is NaN or infinite."""
    if not np.all(np.isfinite(values)):
        raise NumericalError(f"{name} produced non-finite values")
