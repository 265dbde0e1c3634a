"""
Exceptions and validation helpers for the DPMIL pipeline.

Every error the pipeline raises derives from DpmilError and carries the exit
code the CLI reports for it. Field-level validators catch bad configuration
early, before any training starts.
"""

from typing import Any, Optional, Sequence

import numpy as np


class DpmilError(Exception):
    """Base class for all pipeline errors."""
    exit_code = 1


class ConfigError(DpmilError):
    """Invalid, degenerate or unparseable configuration."""
    exit_code = 1

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ConfigError):
    """A single configuration field failed validation."""
    pass


class ArgumentError(DpmilError, ValueError):
    """An operation was called with an out-of-range argument."""
    exit_code = 1


class DataError(DpmilError):
    """Problems with datasets, artifacts or their contents."""
    exit_code = 2


class DataFormatError(DataError):
    """A text artifact could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None, path: Any = None):
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix = f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


class SplitError(DataError):
    """Stratified split impossible for the given dataset."""
    pass


class ResampleError(DataError):
    """Class balancing impossible (e.g. an empty class)."""
    pass


class AggregationError(DataError):
    """Slide-level aggregation over an empty bag."""
    pass


class ArtifactMissingError(DataError):
    """A stage ran before the artifact it reads was produced."""

    def __init__(self, path: Any, producer: Optional[str] = None):
        self.path = path
        hint = f" (run the '{producer}' stage first)" if producer else ""
        super().__init__(f"expected artifact not found: {path}{hint}")


class ShapeError(DpmilError, ValueError):
    """Matrix or vector dimensions do not agree."""
    exit_code = 3


class NumericError(DpmilError, ArithmeticError):
    """Non-finite values appeared during training."""
    exit_code = 3

    def __init__(self, message: str, layer_index: Optional[int] = None):
        self.layer_index = layer_index
        if layer_index is not None:
            message = f"layer {layer_index}: {message}"
        super().__init__(message)


def validate_probability(value: float, name: str = "probability") -> float:
    """
    Validate that a value lies in [0, 1].

    Raises:
        ValidationError: If the value is not numeric or out of range
    """
    if not isinstance(value, (int, float, np.floating)):
        raise ValidationError(f"{name} must be numeric, got {type(value).__name__}")
    if not 0.0 <= float(value) <= 1.0:
        raise ValidationError(f"{name} must be between 0 and 1, got {value}")
    return float(value)


def validate_fraction(value: float, name: str) -> float:
    """Validate a value in the half-open interval [0, 1)."""
    validate_probability(value, name)
    if float(value) >= 1.0:
        raise ValidationError(f"{name} must be below 1, got {value}")
    return float(value)


def validate_positive(value: float, name: str, allow_zero: bool = False) -> float:
    """Validate a strictly positive (or non-negative) number."""
    if not isinstance(value, (int, float, np.integer, np.floating)):
        raise ValidationError(f"{name} must be numeric, got {type(value).__name__}")
    if allow_zero:
        if value < 0:
            raise ValidationError(f"{name} cannot be negative, got {value}")
    elif value <= 0:
        raise ValidationError(f"{name} must be positive, got {value}")
    return value


def validate_count(value: int, name: str, minimum: int = 0) -> int:
    """Validate an integer count with a lower bound."""
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ValidationError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValidationError(f"{name} must be at least {minimum}, got {value}")
    return int(value)


def validate_counts(values: Sequence[int], name: str, length: Optional[int] = None) -> tuple:
    """Validate a sequence of non-negative integer counts."""
    values = tuple(values)
    if length is not None and len(values) != length:
        raise ValidationError(f"{name} needs {length} entries, got {len(values)}")
    for v in values:
        validate_count(v, name)
    return values
