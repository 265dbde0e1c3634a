"""
Bag / instance data model.

A Bag stands in for one whole slide image and holds Instances (patches),
each a feature vector. Training code works on an InstanceTable, a flat
column view of many bags, so minibatches are plain array slices.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from src.utils.constants import RESOLUTION_TAGS
from src.utils.validators import DataError, ShapeError


@dataclass(eq=False)
class Instance:
    """
    One patch.

    is_noise is synthetic ground truth: it is stored and persisted but no
    training operation reads it.
    """
    bag_id: str
    index: int
    features: np.ndarray
    is_noise: bool = False
    resolution_tag: str = "10X"
    augmented: bool = False

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.resolution_tag not in RESOLUTION_TAGS:
            raise DataError(f"unknown resolution tag {self.resolution_tag!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.bag_id == other.bag_id
            and self.index == other.index
            and self.is_noise == other.is_noise
            and self.resolution_tag == other.resolution_tag
            and self.augmented == other.augmented
            and np.array_equal(self.features, other.features)
        )


@dataclass(eq=False)
class Bag:
    """A labelled set of instances sharing a bag id."""
    bag_id: str
    label: int
    instances: List[Instance] = field(default_factory=list)

    def __post_init__(self):
        self.label = int(self.label)
        if not self.instances:
            raise DataError(f"bag {self.bag_id} has no instances")
        for inst in self.instances:
            if inst.bag_id != self.bag_id:
                raise DataError(f"instance {inst.index} belongs to {inst.bag_id}, not {self.bag_id}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Bag):
            return NotImplemented
        return (
            self.bag_id == other.bag_id
            and self.label == other.label
            and len(self.instances) == len(other.instances)
            and all(a == b for a, b in zip(self.instances, other.instances))
        )

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def feature_dim(self) -> int:
        return int(self.instances[0].features.shape[0])

    def feature_matrix(self) -> np.ndarray:
        return np.vstack([inst.features for inst in self.instances])

    def noise_flags(self) -> np.ndarray:
        return np.array([inst.is_noise for inst in self.instances], dtype=bool)


Dataset = List[Bag]


def class_counts(bags: Sequence[Bag], n_classes: int) -> List[int]:
    """Number of bags per class ordinal."""
    counts = [0] * n_classes
    for bag in bags:
        counts[bag.label] += 1
    return counts


def relabel(bags: Sequence[Bag], mapping: Callable[[int], int]) -> List[Bag]:
    """Bags with labels mapped (instances shared, not copied)."""
    return [Bag(bag.bag_id, mapping(bag.label), bag.instances) for bag in bags]


@dataclass
class InstanceTable:
    """
    Column view of instances from many bags.

    Row i is instance instance_index[i] of bag bag_ids[i]; labels carry the
    bag label (each patch inherits its slide's label).
    """
    features: np.ndarray
    labels: np.ndarray
    bag_ids: np.ndarray
    instance_index: np.ndarray
    is_noise: np.ndarray
    augmented: np.ndarray
    source_rows: np.ndarray

    def __post_init__(self):
        n = self.features.shape[0]
        for name in ("labels", "bag_ids", "instance_index", "is_noise", "augmented", "source_rows"):
            if getattr(self, name).shape[0] != n:
                raise ShapeError(f"column {name} has {getattr(self, name).shape[0]} rows, expected {n}")

    @classmethod
    def from_bags(cls, bags: Sequence[Bag]) -> "InstanceTable":
        if not bags:
            raise DataError("cannot build an instance table from zero bags")
        dims = {bag.feature_dim for bag in bags}
        if len(dims) != 1:
            raise ShapeError(f"bags disagree on feature dim: {sorted(dims)}")
        features = np.vstack([bag.feature_matrix() for bag in bags])
        labels = np.concatenate([np.full(len(bag), bag.label, dtype=np.int64) for bag in bags])
        bag_ids = np.concatenate([np.array([bag.bag_id] * len(bag), dtype=object) for bag in bags])
        instance_index = np.concatenate(
            [np.array([inst.index for inst in bag.instances], dtype=np.int64) for bag in bags]
        )
        is_noise = np.concatenate([bag.noise_flags() for bag in bags])
        augmented = np.concatenate(
            [np.array([inst.augmented for inst in bag.instances], dtype=bool) for bag in bags]
        )
        n = features.shape[0]
        return cls(features, labels, bag_ids, instance_index, is_noise, augmented, np.arange(n))

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def subset(self, rows: Sequence[int]) -> "InstanceTable":
        rows = np.asarray(rows, dtype=np.int64)
        return InstanceTable(
            self.features[rows],
            self.labels[rows],
            self.bag_ids[rows],
            self.instance_index[rows],
            self.is_noise[rows],
            self.augmented[rows],
            self.source_rows[rows],
        )

    def rows_of_class(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    def class_sizes(self, n_classes: int) -> List[int]:
        return np.bincount(self.labels, minlength=n_classes)[:n_classes].tolist()

    def with_features(self, features: np.ndarray, augmented: Optional[np.ndarray] = None) -> "InstanceTable":
        """Same rows with replaced feature vectors."""
        return InstanceTable(
            features,
            self.labels.copy(),
            self.bag_ids.copy(),
            self.instance_index.copy(),
            self.is_noise.copy(),
            self.augmented.copy() if augmented is None else augmented,
            self.source_rows.copy(),
        )

    @staticmethod
    def concat(tables: Sequence["InstanceTable"]) -> "InstanceTable":
        return InstanceTable(
            np.vstack([t.features for t in tables]),
            np.concatenate([t.labels for t in tables]),
            np.concatenate([t.bag_ids for t in tables]),
            np.concatenate([t.instance_index for t in tables]),
            np.concatenate([t.is_noise for t in tables]),
            np.concatenate([t.augmented for t in tables]),
            np.concatenate([t.source_rows for t in tables]),
        )

    def group_rows_by_bag(self) -> Dict[str, np.ndarray]:
        """Row indices per bag id, bags in first-appearance order."""
        groups: Dict[str, List[int]] = {}
        for row, bag_id in enumerate(self.bag_ids):
            groups.setdefault(bag_id, []).append(row)
        return {k: np.asarray(v, dtype=np.int64) for k, v in groups.items()}
