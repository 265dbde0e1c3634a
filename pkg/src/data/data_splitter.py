"""
Stratified bag-level train / validation split.

Each class is shuffled (seeded) and its first round(ratio * count) bags go to
training. Bags never straddle the split.
"""

import math
from typing import List, Sequence, Tuple

from src.data.bags import Bag, Dataset
from src.utils.helpers import make_rng
from src.utils.logger import get_logger
from src.utils.validators import ArgumentError, SplitError

logger = get_logger("data")


def train_count(count: int, ratio: float) -> int:
    """round(ratio * count), halves rounded up, kept inside [1, count - 1]."""
    n = int(math.floor(ratio * count + 0.5))
    return min(max(n, 1), count - 1)


def split_counts(class_counts: Sequence[int], ratio: float) -> List[int]:
    """Per-class training counts the split produces for the given class sizes."""
    return [train_count(c, ratio) for c in class_counts]


def split(bags: Sequence[Bag], ratio: float = 0.8, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """
    Stratified split of bags into (train, val).

    Args:
        bags: Dataset
        ratio: Training fraction, 0 < ratio < 1
        seed: Split seed

    Returns:
        (train, val); within each, bags are in class order then shuffled order

    Raises:
        ArgumentError: ratio outside (0, 1)
        SplitError: A present class has fewer than 2 bags
    """
    if not 0.0 < ratio < 1.0:
        raise ArgumentError(f"split ratio must lie in (0, 1), got {ratio}")
    if not bags:
        raise SplitError("cannot split an empty dataset")

    labels = sorted({bag.label for bag in bags})
    train: Dataset = []
    val: Dataset = []
    for label in labels:
        members = [bag for bag in bags if bag.label == label]
        if len(members) < 2:
            raise SplitError(f"class {label} has {len(members)} bag(s); at least 2 are needed to split")
        rng = make_rng(seed, "split", label)
        order = rng.permutation(len(members))
        n_train = train_count(len(members), ratio)
        train.extend(members[i] for i in order[:n_train])
        val.extend(members[i] for i in order[n_train:])
        logger.debug(f"Class {label}: {n_train} train / {len(members) - n_train} val")

    logger.info(f"Split {len(bags)} bags into {len(train)} train / {len(val)} val (ratio {ratio})")
    return train, val
