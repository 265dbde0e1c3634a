"""
Class-balanced instance resampling.

For every epoch each class contributes exactly target_per_class instances:
- classes with a surplus are subsampled without replacement
- classes with a deficit keep all originals and are topped up with augmented
  copies of randomly chosen originals

Image flips have no feature-space analogue, so augmentation adds independent
Gaussian jitter of scale augment_sigma to every feature.
"""

from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from src.data.bags import Instance, InstanceTable
from src.utils.constants import AUGMENT_SIGMA_SCALE, NUM_SUBTYPES, Subtype
from src.utils.helpers import make_rng
from src.utils.logger import get_logger
from src.utils.validators import ResampleError, validate_count, validate_positive

logger = get_logger("data")


@dataclass
class ResampleConfig:
    """
    Balancing parameters.

    target_per_class None means the median class size of the input.
    augment_sigma None means AUGMENT_SIGMA_SCALE * cluster_spread; use
    for_spread() to fill it in from the generator.
    """
    target_per_class: Optional[int] = None
    augment_sigma: Optional[float] = None
    seed: int = 0

    def validate(self) -> "ResampleConfig":
        if self.target_per_class is not None:
            validate_count(self.target_per_class, "resample.target_per_class", minimum=1)
        if self.augment_sigma is not None:
            validate_positive(self.augment_sigma, "resample.augment_sigma", allow_zero=True)
        return self

    def for_spread(self, cluster_spread: float) -> "ResampleConfig":
        """Copy with an unset augment_sigma scaled to the given cluster spread."""
        if self.augment_sigma is not None:
            return self
        return replace(self, augment_sigma=AUGMENT_SIGMA_SCALE * float(cluster_spread))

    @property
    def sigma(self) -> float:
        if self.augment_sigma is None:
            return AUGMENT_SIGMA_SCALE
        return float(self.augment_sigma)


def _class_name(label: int, n_classes: int) -> str:
    if n_classes == NUM_SUBTYPES:
        return f"{label} ({Subtype(label).display_name})"
    return str(label)


def augment_features(features: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Copy of features with N(0, sigma^2) jitter added independently per entry."""
    if sigma == 0.0:
        return np.array(features, dtype=np.float64, copy=True)
    return features + sigma * rng.normal(size=features.shape)


def augment(instance: Instance, sigma: float, seed: int) -> Instance:
    """
    Jittered copy of one instance; bag id and index preserved, marked augmented.

    Example:
        >>> augment(inst, 0.0, seed=1).features == inst.features  # elementwise
    """
    if sigma < 0:
        raise ResampleError(f"augment sigma cannot be negative, got {sigma}")
    rng = np.random.default_rng(seed)
    return replace(instance, features=augment_features(instance.features, sigma, rng), augmented=True)


def resolve_target(class_sizes: List[int], config: ResampleConfig) -> int:
    if config.target_per_class is not None:
        return int(config.target_per_class)
    return max(1, int(np.median(class_sizes)))


def balance(table: InstanceTable, config: ResampleConfig, n_classes: int, epoch: int = 0) -> InstanceTable:
    """
    One epoch's class-balanced sample.

    Args:
        table: Instances labelled with their bag label
        config: Target size, jitter scale, seed
        n_classes: Number of classes that must all be present
        epoch: Mixed into the seed so every epoch draws a fresh sample

    Returns:
        Table with exactly target_per_class rows per class, grouped by class;
        augmented rows have augmented=True

    Raises:
        ResampleError: A class has no instances
    """
    config.validate()
    sizes = table.class_sizes(n_classes)
    for label, size in enumerate(sizes):
        if size == 0:
            raise ResampleError(f"class {_class_name(label, n_classes)} has no instances to resample")

    target = resolve_target(sizes, config)
    rng = make_rng(config.seed, "resample", epoch)

    parts: List[InstanceTable] = []
    n_augmented = 0
    for label in range(n_classes):
        rows = table.rows_of_class(label)
        if rows.size >= target:
            picked = np.sort(rng.choice(rows, size=target, replace=False))
            parts.append(table.subset(picked))
            continue

        parts.append(table.subset(rows))
        extra_rows = rng.choice(rows, size=target - rows.size, replace=True)
        extra = table.subset(extra_rows)
        jittered = augment_features(extra.features, config.sigma, rng)
        parts.append(extra.with_features(jittered, augmented=np.ones(extra_rows.size, dtype=bool)))
        n_augmented += extra_rows.size

    sample = InstanceTable.concat(parts)
    logger.debug(f"Balanced epoch {epoch}: {n_classes} x {target} instances ({n_augmented} augmented)")
    return sample
