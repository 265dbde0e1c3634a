"""
Text checkpoints for MlpModel.

Format ("mlp v1"):
    line 1: mlp v1
    line 2: layer dims, space separated
    then per layer: one line with the weight matrix (row-major), one line with the bias
All values are written with 17 significant digits, so reading a checkpoint
back gives bit-identical parameters.
"""

from pathlib import Path
from typing import List, Union

import numpy as np

from src.models.mlp import MlpModel
from src.utils.constants import CHECKPOINT_MAGIC
from src.utils.helpers import format_floats
from src.utils.logger import get_logger
from src.utils.validators import DataFormatError, ShapeError

logger = get_logger("model")


def format_checkpoint(model: MlpModel) -> str:
    lines = [CHECKPOINT_MAGIC, " ".join(str(d) for d in model.layer_dims)]
    for w, b in zip(model.weights, model.biases):
        lines.append(" ".join(format_floats(w.reshape(-1))))
        lines.append(" ".join(format_floats(b)))
    return "\n".join(lines) + "\n"


def write_checkpoint(model: MlpModel, path: Union[str, Path]) -> Path:
    """Write a model checkpoint, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_checkpoint(model), encoding="utf-8")
    logger.debug(f"Checkpoint written: {path} ({model.num_parameters()} parameters)")
    return path


def _parse_floats(text: str, expected: int, line_no: int, path: Path) -> np.ndarray:
    parts = text.split()
    if len(parts) != expected:
        raise DataFormatError(f"expected {expected} values, found {len(parts)}", line=line_no, path=path)
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as e:
        raise DataFormatError(f"bad number: {e}", line=line_no, path=path) from e


def read_checkpoint(path: Union[str, Path]) -> MlpModel:
    """
    Read a checkpoint written by write_checkpoint().

    Raises:
        DataFormatError: Malformed header or value lines (with line number)
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_MAGIC:
        raise DataFormatError(f"missing '{CHECKPOINT_MAGIC}' header", line=1, path=path)
    if len(lines) < 2:
        raise DataFormatError("missing layer dims", line=2, path=path)
    try:
        dims = [int(p) for p in lines[1].split()]
    except ValueError as e:
        raise DataFormatError(f"bad layer dims: {e}", line=2, path=path) from e
    if len(dims) < 2 or min(dims) < 1:
        raise DataFormatError(f"invalid layer dims {dims}", line=2, path=path)

    n_layers = len(dims) - 1
    expected_lines = 2 + 2 * n_layers
    if len(lines) != expected_lines:
        raise DataFormatError(
            f"expected {expected_lines} lines for {n_layers} layers, found {len(lines)}",
            line=min(len(lines), expected_lines) + 1,
            path=path,
        )

    weights: List[np.ndarray] = []
    biases: List[np.ndarray] = []
    for i in range(n_layers):
        w_line = 3 + 2 * i
        w = _parse_floats(lines[w_line - 1], dims[i] * dims[i + 1], w_line, path)
        b = _parse_floats(lines[w_line], dims[i + 1], w_line + 1, path)
        weights.append(w.reshape(dims[i], dims[i + 1]))
        biases.append(b)
    try:
        return MlpModel(tuple(dims), weights, biases)
    except ShapeError as e:
        raise DataFormatError(str(e), path=path) from e
