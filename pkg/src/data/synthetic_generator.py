"""
Synthetic Bag Generator - stand-in for a cohort of whole slide images.

Each bag of class c holds:
- discriminative instances drawn from an isotropic Gaussian at the class-c
  centre (ceil((1 - noise_fraction) * n) of them)
- noise instances drawn from a background Gaussian mixture shared by all
  classes (benign tissue, folds, background)

Geometry:
    Class centres and background component centres sit on orthonormal
    directions scaled so that every pair of centres is
    class_center_separation apart (when feature_dim is large enough to hold
    them all orthogonally).

Usage:
    config = GenConfig(seed=7)
    bags = generate(config)
"""

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.data.bags import Bag, Dataset, Instance
from src.utils.constants import RESOLUTION_TAGS
from src.utils.helpers import make_rng
from src.utils.logger import get_logger
from src.utils.validators import (
    ConfigError,
    validate_count,
    validate_counts,
    validate_fraction,
    validate_positive,
)

logger = get_logger("data")


@dataclass
class GenConfig:
    """
    Synthetic cohort parameters.

    Default bag counts follow the reference cohort's training-set class
    proportions, scaled down roughly tenfold.
    """
    bags_per_class: Tuple[int, ...] = (25, 30, 25, 20)
    instances_per_bag: Tuple[int, int] = (30, 60)
    noise_fraction: float = 0.4
    class_center_separation: float = 5.0
    cluster_spread: float = 1.0
    feature_dim: int = 16
    background_components: int = 2
    resolution_tag: str = "10X"
    seed: int = 0

    def validate(self) -> "GenConfig":
        self.bags_per_class = validate_counts(self.bags_per_class, "generator.bags_per_class")
        if sum(self.bags_per_class) == 0:
            raise ConfigError("generator.bags_per_class: at least one bag is required")
        lo, hi = validate_counts(self.instances_per_bag, "generator.instances_per_bag", length=2)
        if lo < 1 or lo > hi:
            raise ConfigError(f"generator.instances_per_bag must satisfy 1 <= min <= max, got {(lo, hi)}")
        self.instances_per_bag = (lo, hi)
        validate_fraction(self.noise_fraction, "generator.noise_fraction")
        validate_positive(self.class_center_separation, "generator.class_center_separation")
        validate_positive(self.cluster_spread, "generator.cluster_spread")
        validate_count(self.feature_dim, "generator.feature_dim", minimum=1)
        validate_count(self.background_components, "generator.background_components", minimum=1)
        if self.resolution_tag not in RESOLUTION_TAGS:
            raise ConfigError(f"generator.resolution_tag must be one of {RESOLUTION_TAGS}")
        return self

    @property
    def n_classes(self) -> int:
        return len(self.bags_per_class)


def _unit_directions(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    # Orthonormal columns when they fit, otherwise random unit vectors.
    raw = rng.normal(size=(dim, count))
    if dim >= count:
        q, r = np.linalg.qr(raw)
        return q * np.sign(np.diag(r))
    return raw / np.linalg.norm(raw, axis=0, keepdims=True)


def cluster_centers(config: GenConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Class centres (n_classes, dim) and background centres (components, dim).

    Deterministic per seed; generate() uses the same centres.
    """
    rng = make_rng(config.seed, "generator", "centers")
    n_dirs = config.n_classes + config.background_components
    directions = _unit_directions(rng, config.feature_dim, n_dirs)
    radius = config.class_center_separation / math.sqrt(2.0)
    centers = (radius * directions).T
    return centers[: config.n_classes], centers[config.n_classes:]


def clean_count(n: int, noise_fraction: float) -> int:
    """Discriminative instances in a bag of n: ceil((1 - noise_fraction) * n)."""
    return int(math.ceil(round((1.0 - noise_fraction) * n, 9)))


def generate(config: GenConfig) -> Dataset:
    """
    Generate a synthetic cohort of bags.

    Bags are produced class by class (ordinal order) with ids bag0000,
    bag0001, ... Instance order within a bag is shuffled so noise instances
    are not grouped at the end.

    Raises:
        ConfigError: Degenerate configuration (e.g. zero bags)
    """
    config.validate()
    class_centers, background_centers = cluster_centers(config)
    rng = make_rng(config.seed, "generator", "bags")
    lo, hi = config.instances_per_bag
    spread = config.cluster_spread
    dim = config.feature_dim

    bags: List[Bag] = []
    bag_number = 0
    for label, n_bags in enumerate(config.bags_per_class):
        for _ in range(n_bags):
            bag_id = f"bag{bag_number:04d}"
            bag_number += 1
            n = int(rng.integers(lo, hi + 1))
            n_clean = clean_count(n, config.noise_fraction)
            n_noise = n - n_clean

            clean = class_centers[label] + spread * rng.normal(size=(n_clean, dim))
            components = rng.integers(0, config.background_components, size=n_noise)
            noise = background_centers[components] + spread * rng.normal(size=(n_noise, dim))

            features = np.vstack([clean, noise])
            flags = np.concatenate([np.zeros(n_clean, dtype=bool), np.ones(n_noise, dtype=bool)])
            order = rng.permutation(n)

            instances = [
                Instance(
                    bag_id=bag_id,
                    index=position,
                    features=features[src],
                    is_noise=bool(flags[src]),
                    resolution_tag=config.resolution_tag,
                )
                for position, src in enumerate(order)
            ]
            bags.append(Bag(bag_id, label, instances))

    n_instances = sum(len(b) for b in bags)
    logger.info(
        f"Generated {len(bags)} bags ({n_instances} instances, dim {dim}) "
        f"per class {list(config.bags_per_class)}, noise fraction {config.noise_fraction}"
    )
    return bags


def nearest_centroid_accuracy(bags: Dataset, config: GenConfig) -> float:
    """
    Instance accuracy of a nearest-class-centre rule on non-noise instances.

    Sanity floor for every downstream learning claim.
    """
    class_centers, _ = cluster_centers(config)
    correct = total = 0
    for bag in bags:
        x = bag.feature_matrix()[~bag.noise_flags()]
        if x.size == 0:
            continue
        d = ((x[:, None, :] - class_centers[None, :, :]) ** 2).sum(axis=2)
        correct += int(np.sum(np.argmin(d, axis=1) == bag.label))
        total += x.shape[0]
    return correct / total if total else float("nan")


