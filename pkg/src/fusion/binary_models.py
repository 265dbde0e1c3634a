"""
One-vs-rest binary subtype models.

Each binary model is trained with the full DPMIL pipeline on relabelled
bags: the target subtype becomes ordinal 1, the three other subtypes are
pooled into ordinal 0 without rebalancing among them (the resampler then
balances target against rest). Its confidence for a bag is the slide-level
mean probability of ordinal 1.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

from joblib import Parallel, delayed

from src.data.bags import Bag, relabel
from src.models.mlp import MlpModel
from src.training.dpmil_pipeline import DpmilConfig, run_dpmil
from src.training.mil_trainer import predict_slide
from src.utils.constants import BINARY_REST, BINARY_TARGET, NUM_BINARY_CLASSES, NUM_SUBTYPES, Subtype
from src.utils.logger import get_logger
from src.utils.validators import ConfigError, ShapeError

logger = get_logger("fusion")


@dataclass
class BinaryModel:
    """Target-vs-rest classifier for one subtype."""
    target: int
    model: MlpModel

    def __post_init__(self):
        if self.model.n_classes != NUM_BINARY_CLASSES:
            raise ShapeError(f"binary model needs {NUM_BINARY_CLASSES} outputs, got {self.model.n_classes}")

    def target_confidence(self, bag: Bag) -> float:
        return float(predict_slide(self.model, bag).probs[BINARY_TARGET])


def binary_labels(bags: Sequence[Bag], target: int) -> List[Bag]:
    """Bags relabelled target -> 1, every other class -> 0."""
    return relabel(bags, lambda label: BINARY_TARGET if label == target else BINARY_REST)


def _target_name(target: int) -> str:
    try:
        return Subtype(target).display_name
    except ValueError:
        return str(target)


def train_binary(
    target: int,
    train_bags: Sequence[Bag],
    val_bags: Sequence[Bag],
    config: DpmilConfig,
    seed: int = 0,
    alpha: float = 0.5,
    threads: Optional[int] = None,
) -> BinaryModel:
    """
    Train the target-vs-rest model with resample, co-teaching, LOF and MIL fine-tuning.

    Raises:
        ConfigError: No bags of the target class, or no bags of any other class
    """
    train = binary_labels(train_bags, target)
    positives = sum(1 for bag in train if bag.label == BINARY_TARGET)
    if positives == 0:
        raise ConfigError(f"no training bags of target class {_target_name(target)}")
    if positives == len(train):
        raise ConfigError(f"no negative training bags for target class {_target_name(target)}")

    val = binary_labels(val_bags, target)
    run_config = config.reseeded(seed, "binary", target).with_alpha(alpha)
    result = run_dpmil(train, val, run_config, n_classes=NUM_BINARY_CLASSES, threads=threads)
    logger.info(f"Binary model for {_target_name(target)} trained ({positives} positive / {len(train) - positives} rest bags)")
    return BinaryModel(target, result.model)


def train_all_binaries(
    train_bags: Sequence[Bag],
    val_bags: Sequence[Bag],
    config: DpmilConfig,
    seed: int = 0,
    n_classes: int = NUM_SUBTYPES,
    alpha: float = 0.5,
    threads: Optional[int] = None,
) -> List[BinaryModel]:
    """One binary model per class, trained concurrently up to `threads` at a time."""
    n_jobs = 1 if not threads else max(1, min(threads, n_classes))
    return Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(train_binary)(target, train_bags, val_bags, config, seed, alpha) for target in range(n_classes)
    )
