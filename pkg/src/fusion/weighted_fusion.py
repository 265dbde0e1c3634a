"""
Weighted Fusion - Combining the One-vs-Rest Models

Each binary model reports its target confidence for a bag. The fused score
of class c is w_c * conf_c and the prediction is the argmax (lowest class
ordinal on ties).

Weights come either from a fixed setting or from an exhaustive grid search
over {step, 2*step, ..., 1.0}^M on validation bags, keeping the first tuple
in lexicographic order that maximizes the objective.

Fusion file ("fusion v1"):
    line 1: fusion v1
    then one "class_ordinal weight" line per class
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.data.bags import Bag
from src.evaluation.performance_metrics import accuracy_batch, macro_f1_batch
from src.fusion.binary_models import BinaryModel
from src.utils.constants import FUSION_MAGIC, NUM_SUBTYPES
from src.utils.helpers import argmax_lowest, format_float
from src.utils.logger import get_logger
from src.utils.validators import ArgumentError, DataError, DataFormatError, ValidationError

logger = get_logger("fusion")

OBJECTIVES = ("macro_f1", "accuracy")


@dataclass
class FusionConfig:
    grid_step: float = 0.1
    objective: str = "macro_f1"
    fixed_weights: Optional[Tuple[float, ...]] = None
    binary_alpha: float = 0.5
    chunk_size: int = 2048

    def validate(self) -> "FusionConfig":
        grid_values(self.grid_step)
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"fusion.objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.fixed_weights is not None:
            FusionWeights(tuple(self.fixed_weights))
        if self.binary_alpha < 0:
            raise ValidationError(f"fusion.binary_alpha cannot be negative, got {self.binary_alpha}")
        if self.chunk_size < 1:
            raise ValidationError(f"fusion.chunk_size must be positive, got {self.chunk_size}")
        return self


@dataclass(frozen=True)
class FusionWeights:
    """Per-class weights, all strictly positive."""
    weights: Tuple[float, ...]

    def __post_init__(self):
        if not self.weights:
            raise ValidationError("fusion weights cannot be empty")
        for w in self.weights:
            if not np.isfinite(w) or w <= 0:
                raise ValidationError(f"fusion weights must be positive, got {self.weights}")

    @classmethod
    def uniform(cls, n_classes: int = NUM_SUBTYPES) -> "FusionWeights":
        return cls((1.0,) * n_classes)

    @property
    def n_classes(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


def fuse(confidences: Sequence[float], weights: FusionWeights) -> int:
    """
    Fused class for one bag.

    Example:
        >>> fuse((0.8, 0.6, 0.9, 0.7), FusionWeights((0.6, 0.9, 0.5, 0.7)))
        1
    """
    conf = np.asarray(confidences, dtype=np.float64)
    if conf.shape[0] != weights.n_classes:
        raise ArgumentError(f"{conf.shape[0]} confidences but {weights.n_classes} weights")
    return argmax_lowest(weights.as_array() * conf)


def fuse_batch(confidences: np.ndarray, weights: FusionWeights) -> np.ndarray:
    """Fused classes for an (n, M) confidence matrix."""
    conf = np.asarray(confidences, dtype=np.float64)
    return np.argmax(conf * weights.as_array()[None, :], axis=1)


def grid_values(step: float) -> np.ndarray:
    """
    {step, 2*step, ..., 1.0}.

    Raises:
        ArgumentError: step does not divide (0, 1] into at least 2 points
    """
    if not 0.0 < step <= 0.5:
        raise ArgumentError(f"grid step must lie in (0, 0.5], got {step}")
    count = int(round(1.0 / step))
    if abs(count * step - 1.0) > 1e-9:
        raise ArgumentError(f"grid step {step} does not divide 1")
    return np.round(step * np.arange(1, count + 1), 12)


def weight_grid(step: float, n_classes: int = NUM_SUBTYPES) -> np.ndarray:
    """All weight tuples, (K**M, M), in lexicographic order."""
    values = grid_values(step)
    mesh = np.meshgrid(*([values] * n_classes), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def grid_search(
    confidences: np.ndarray,
    truths: Sequence[int],
    grid_step: float = 0.1,
    objective: str = "macro_f1",
    chunk_size: int = 2048,
) -> Tuple[FusionWeights, float, int]:
    """
    Exhaustive weight search on validation confidences.

    Args:
        confidences: (n, M) binary target confidences per bag
        truths: n true classes
        grid_step: Grid spacing
        objective: 'macro_f1' or 'accuracy'

    Returns:
        (best weights, best objective value, number of tuples evaluated)

    Raises:
        ArgumentError: Empty validation set or bad grid step
    """
    conf = np.asarray(confidences, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.int64)
    if conf.ndim != 2 or conf.shape[0] == 0:
        raise ArgumentError("grid search needs at least one validation bag")
    if truths.shape[0] != conf.shape[0]:
        raise ArgumentError(f"{conf.shape[0]} confidence rows but {truths.shape[0]} truths")
    if objective not in OBJECTIVES:
        raise ArgumentError(f"unknown objective {objective!r}")

    n_classes = conf.shape[1]
    grid = weight_grid(grid_step, n_classes)
    best_value = -np.inf
    best_index = 0
    for start in range(0, grid.shape[0], chunk_size):
        chunk = grid[start:start + chunk_size]
        scores = chunk[:, None, :] * conf[None, :, :]
        predictions = np.argmax(scores, axis=2)
        if objective == "macro_f1":
            values = macro_f1_batch(predictions, truths, n_classes)
        else:
            values = accuracy_batch(predictions, truths)
        local = int(np.argmax(values))
        if values[local] > best_value:
            best_value = float(values[local])
            best_index = start + local

    best = FusionWeights(tuple(float(w) for w in grid[best_index]))
    logger.info(f"Grid search over {grid.shape[0]} tuples: best {objective} {best_value:.4f} at {best.weights}")
    return best, best_value, int(grid.shape[0])


class WeightedFusion:
    """
    Combines the binary models into one multi-class prediction.
    """

    def __init__(self, models: Sequence[BinaryModel], weights: Optional[FusionWeights] = None):
        if not models:
            raise ArgumentError("fusion needs at least one binary model")
        targets = [m.target for m in models]
        if targets != list(range(len(models))):
            raise ArgumentError(f"binary models must cover classes 0..{len(models) - 1} in order, got {targets}")
        self.models = list(models)
        self.weights = weights or FusionWeights.uniform(len(models))
        if self.weights.n_classes != len(models):
            raise ArgumentError(f"{self.weights.n_classes} fusion weights for {len(models)} binary models")

        logger.info(f"Fusion initialised with {len(models)} binary models, weights {self.weights.weights}")

    def confidences(self, bags: Sequence[Bag]) -> np.ndarray:
        """(n_bags, M) target confidences."""
        return np.array([[m.target_confidence(bag) for m in self.models] for bag in bags], dtype=np.float64).reshape(
            len(bags), len(self.models)
        )

    def predict(self, bags: Sequence[Bag]) -> List[int]:
        return [int(c) for c in fuse_batch(self.confidences(bags), self.weights)]

    def optimise_weights(self, val_bags: Sequence[Bag], config: FusionConfig) -> FusionWeights:
        """Set weights by grid search on validation bags (or to the fixed weights)."""
        config.validate()
        if config.fixed_weights is not None:
            self.weights = FusionWeights(tuple(config.fixed_weights))
            logger.info(f"Using fixed fusion weights {self.weights.weights}")
            return self.weights
        if not val_bags:
            raise ArgumentError("grid search needs at least one validation bag")
        self.weights, _, _ = grid_search(
            self.confidences(val_bags),
            [bag.label for bag in val_bags],
            config.grid_step,
            config.objective,
            config.chunk_size,
        )
        return self.weights


def format_fusion(weights: FusionWeights) -> str:
    lines = [FUSION_MAGIC] + [f"{c} {format_float(w)}" for c, w in enumerate(weights.weights)]
    return "\n".join(lines) + "\n"


def write_fusion(weights: FusionWeights, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_fusion(weights), encoding="utf-8")
    return path


def read_fusion(path: Union[str, Path]) -> FusionWeights:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != FUSION_MAGIC:
        raise DataFormatError(f"expected '{FUSION_MAGIC}' header", line=1, path=path)
    weights = []
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split()
        if len(parts) != 2:
            raise DataFormatError("expected 'class_ordinal weight'", line=line_no, path=path)
        try:
            ordinal, weight = int(parts[0]), float(parts[1])
        except ValueError as e:
            raise DataFormatError(f"bad value: {e}", line=line_no, path=path) from e
        if ordinal != len(weights):
            raise DataFormatError(f"expected class ordinal {len(weights)}, got {ordinal}", line=line_no, path=path)
        weights.append(weight)
    if not weights:
        raise DataError(f"{path}: no fusion weights")
    try:
        return FusionWeights(tuple(weights))
    except ValidationError as e:
        raise DataFormatError(str(e), path=path) from e
