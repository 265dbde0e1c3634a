"""
Co-teaching of two peer classifiers on noisy instance labels.

Every instance inherits its bag's label, so patches from background tissue
carry wrong labels. Per minibatch each model ranks the samples by its own
loss, keeps the ceil(R(T) * batch) smallest, and its PEER trains on that
selection. The keep rate ramps down linearly:

    R(T) = 1 - tau * min(T / Tk, 1)

Both selections are computed before either model is updated. Batch order
and resampling depend only on the run seed, not on which model is which, so
swapping the two model seeds swaps the two results.

After training the model with the better validation macro F1 picks
candidate patches: an instance is kept when its predicted class equals the
bag label and the winning probability reaches conf_threshold.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.data.bags import Bag, InstanceTable
from src.data.resampler import ResampleConfig, balance, resolve_target
from src.features.candidates import CandidateSet
from src.models.mlp import MlpModel, cross_entropy_batch, forward
from src.models.optimizer import OptimizerState, poly_lr, sgd_step
from src.training.mil_trainer import slide_metrics
from src.utils.constants import DEFAULT_BATCH_SIZE, DEFAULT_HIDDEN_DIMS, DEFAULT_POLY_POWER, NUM_SUBTYPES
from src.utils.helpers import batches, derive_seed, make_rng
from src.utils.logger import get_logger
from src.utils.validators import (
    ArgumentError,
    ConfigError,
    ValidationError,
    validate_count,
    validate_fraction,
    validate_positive,
)

logger = get_logger("coteach")


@dataclass
class CoteachConfig:
    """
    Co-teaching schedule.

    forget_rate (tau) has no safe default: the true noise rate is unknown at
    run time, so it must be set explicitly. Every minibatch is kept whole for
    the first warmup_epochs epochs; the forget ramp starts after that.
    """
    epochs: int = 20
    batch_size: int = DEFAULT_BATCH_SIZE
    lr0: float = 0.01
    power: float = DEFAULT_POLY_POWER
    forget_rate: Optional[float] = None
    ramp_epochs: int = 10
    warmup_epochs: int = 5
    conf_threshold: float = 0.5
    hidden_dims: Tuple[int, ...] = DEFAULT_HIDDEN_DIMS
    seed: int = 0
    model_seeds: Optional[Tuple[int, int]] = None

    def validate(self) -> "CoteachConfig":
        validate_count(self.epochs, "coteach.epochs")
        validate_count(self.batch_size, "coteach.batch_size", minimum=1)
        validate_positive(self.lr0, "coteach.lr0", allow_zero=True)
        validate_positive(self.power, "coteach.power")
        if self.forget_rate is None:
            raise ValidationError("coteach.forget_rate is required")
        validate_fraction(self.forget_rate, "coteach.forget_rate")
        validate_count(self.ramp_epochs, "coteach.ramp_epochs", minimum=1)
        validate_count(self.warmup_epochs, "coteach.warmup_epochs")
        if not 0.0 < self.conf_threshold <= 1.0:
            raise ValidationError(f"coteach.conf_threshold must lie in (0, 1], got {self.conf_threshold}")
        if self.model_seeds is not None and len(self.model_seeds) != 2:
            raise ValidationError("coteach.model_seeds needs exactly two seeds")
        return self

    def resolved_model_seeds(self) -> Tuple[int, int]:
        if self.model_seeds is not None:
            return int(self.model_seeds[0]), int(self.model_seeds[1])
        return derive_seed(self.seed, "coteach", "model_a"), derive_seed(self.seed, "coteach", "model_b")


@dataclass
class CoteachResult:
    """
    Both peers, which one won on validation, and the winner's candidates.

    selected_rows_a / selected_rows_b are rows of the training table each
    model handed to its peer during the final epoch.
    """
    model_a: MlpModel
    model_b: MlpModel
    chosen: str
    candidates: CandidateSet
    history: List[dict] = field(default_factory=list)
    selected_rows_a: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    selected_rows_b: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def chosen_model(self) -> MlpModel:
        return self.model_a if self.chosen == "a" else self.model_b


def keep_rate(epoch: int, tau: float, ramp_epochs: int, warmup_epochs: int = 0) -> float:
    """
    Fraction of each minibatch kept at the given (0-based) epoch.

    The rate stays at 1 through warmup_epochs, then falls linearly to 1 - tau
    over ramp_epochs.

    Examples:
        >>> keep_rate(0, 0.4, 10)
        1.0
        >>> keep_rate(5, 0.4, 10)
        0.8
        >>> keep_rate(7, 0.4, 10, warmup_epochs=2)
        0.8
    """
    if epoch < 0:
        raise ArgumentError(f"epoch cannot be negative, got {epoch}")
    if warmup_epochs < 0:
        raise ArgumentError(f"warmup_epochs cannot be negative, got {warmup_epochs}")
    return 1.0 - tau * min(max(epoch - warmup_epochs, 0) / ramp_epochs, 1.0)


def keep_count(rate: float, batch_len: int) -> int:
    """ceil(rate * batch_len), at least 1."""
    return min(batch_len, max(1, math.ceil(round(rate * batch_len, 9))))


def select_small_loss(losses: Sequence[float], keep: int) -> np.ndarray:
    """
    Indices of the keep smallest losses, in ascending index order.

    Ties go to the lower index.

    Raises:
        ArgumentError: keep outside [1, len(losses)]

    Example:
        >>> select_small_loss([0.1, 2.0, 0.05, 1.5], 2)
        array([0, 2])
    """
    losses = np.asarray(losses, dtype=np.float64)
    if not 1 <= keep <= losses.shape[0]:
        raise ArgumentError(f"keep count {keep} outside [1, {losses.shape[0]}]")
    order = np.argsort(losses, kind="stable")
    return np.sort(order[:keep])


def _epoch_size(table: InstanceTable, resample: Optional[ResampleConfig], n_classes: int) -> int:
    if resample is None:
        return len(table)
    return n_classes * resolve_target(table.class_sizes(n_classes), resample)


def _epoch_table(table: InstanceTable, resample: Optional[ResampleConfig], n_classes: int, epoch: int) -> InstanceTable:
    if resample is None:
        return table
    return balance(table, resample, n_classes, epoch=epoch)


def _training_table(train_bags: Sequence[Bag]) -> InstanceTable:
    if not train_bags:
        raise ConfigError("training set is empty")
    return InstanceTable.from_bags(train_bags)


def _val_f1(model: MlpModel, val_bags: Sequence[Bag], n_classes: int) -> float:
    if not val_bags:
        return float("nan")
    return slide_metrics(model, val_bags, n_classes).f1_macro


def extract_candidates(model: MlpModel, instances: InstanceTable, conf_threshold: float) -> CandidateSet:
    """
    Confidence-selected candidate patches, grouped by bag label.

    Keeps an instance iff its argmax class equals its bag label and the max
    probability is at least conf_threshold.
    """
    if not 0.0 < conf_threshold <= 1.0:
        raise ArgumentError(f"conf_threshold must lie in (0, 1], got {conf_threshold}")
    if len(instances) == 0:
        return CandidateSet.empty(model.feature_dim, instances.feature_dim)
    probs, features = forward(model, instances.features)
    predicted = np.argmax(probs, axis=1)
    confidence = probs.max(axis=1)
    passing = np.flatnonzero((predicted == instances.labels) & (confidence >= conf_threshold))
    passing = passing[np.argsort(instances.labels[passing], kind="stable")]
    logger.info(f"Selected {passing.size}/{len(instances)} candidate patches at threshold {conf_threshold}")
    return CandidateSet.from_table(instances, passing, features, confidence)


def train_single(
    train_bags: Sequence[Bag],
    val_bags: Sequence[Bag],
    config: CoteachConfig,
    n_classes: int = NUM_SUBTYPES,
    model_seed: Optional[int] = None,
    resample: Optional[ResampleConfig] = None,
    history: Optional[List[dict]] = None,
) -> MlpModel:
    """
    Plain minibatch training of one model on every sample.

    Uses the same batch order and resampling streams as train_coteach, so it
    matches one co-teaching peer run with tau = 0.
    """
    config.validate()
    table = _training_table(train_bags)
    seed = model_seed if model_seed is not None else config.resolved_model_seeds()[0]
    model = MlpModel.build(table.feature_dim, n_classes, config.hidden_dims, seed)

    n_batches = math.ceil(_epoch_size(table, resample, n_classes) / config.batch_size)
    opt = OptimizerState.for_schedule(config.lr0, config.epochs, n_batches, config.power, config.batch_size)
    batch_rng = make_rng(config.seed, "coteach", "batches")

    for epoch in range(config.epochs):
        sample = _epoch_table(table, resample, n_classes, epoch)
        order = batch_rng.permutation(len(sample))
        losses = []
        for sl in batches(order.size, config.batch_size):
            idx = order[sl]
            _, batch_losses = sgd_step(model, sample.features[idx], sample.labels[idx], opt)
            losses.append(batch_losses)
        if history is not None:
            history.append({
                "epoch": epoch + 1,
                "train_loss": float(np.mean(np.concatenate(losses))),
                "val_f1": _val_f1(model, val_bags, n_classes),
            })
    return model


def train_coteach(
    train_bags: Sequence[Bag],
    val_bags: Sequence[Bag],
    config: CoteachConfig,
    n_classes: int = NUM_SUBTYPES,
    resample: Optional[ResampleConfig] = None,
    progress: bool = False,
) -> CoteachResult:
    """
    Train two peers with small-loss exchange and pick the better one.

    Args:
        train_bags: Training bags; instances take their bag's label
        val_bags: Bags for per-epoch slide-level macro F1 (may be empty)
        config: Schedule, forget rate, seeds
        n_classes: Output classes
        resample: Per-epoch class balancing; None trains on the raw table
        progress: Show a tqdm bar over epochs

    Returns:
        CoteachResult; deterministic for a given config

    Raises:
        ConfigError: Empty training set or missing forget rate
    """
    config.validate()
    table = _training_table(train_bags)
    seed_a, seed_b = config.resolved_model_seeds()
    model_a = MlpModel.build(table.feature_dim, n_classes, config.hidden_dims, seed_a)
    model_b = MlpModel.build(table.feature_dim, n_classes, config.hidden_dims, seed_b)

    n_batches = math.ceil(_epoch_size(table, resample, n_classes) / config.batch_size)
    opt_a = OptimizerState.for_schedule(config.lr0, config.epochs, n_batches, config.power, config.batch_size)
    opt_b = OptimizerState.for_schedule(config.lr0, config.epochs, n_batches, config.power, config.batch_size)
    batch_rng = make_rng(config.seed, "coteach", "batches")

    history: List[dict] = []
    selected_a: List[np.ndarray] = []
    selected_b: List[np.ndarray] = []
    val_a = val_b = float("nan")

    for epoch in tqdm(range(config.epochs), desc="co-teaching", disable=not progress, leave=False):
        rate = keep_rate(epoch, config.forget_rate, config.ramp_epochs, config.warmup_epochs)
        lr = poly_lr(opt_a)
        sample = _epoch_table(table, resample, n_classes, epoch)
        order = batch_rng.permutation(len(sample))
        selected_a, selected_b = [], []
        losses_a, losses_b = [], []

        for sl in batches(order.size, config.batch_size):
            idx = order[sl]
            x, y = sample.features[idx], sample.labels[idx]
            probs_a, _ = forward(model_a, x)
            probs_b, _ = forward(model_b, x)
            loss_a = cross_entropy_batch(probs_a, y)
            loss_b = cross_entropy_batch(probs_b, y)
            keep = keep_count(rate, idx.size)
            pick_a = select_small_loss(loss_a, keep)
            pick_b = select_small_loss(loss_b, keep)

            sgd_step(model_b, x[pick_a], y[pick_a], opt_b)
            sgd_step(model_a, x[pick_b], y[pick_b], opt_a)

            selected_a.append(sample.source_rows[idx[pick_a]])
            selected_b.append(sample.source_rows[idx[pick_b]])
            losses_a.append(loss_a)
            losses_b.append(loss_b)

        val_a = _val_f1(model_a, val_bags, n_classes)
        val_b = _val_f1(model_b, val_bags, n_classes)
        record = {
            "epoch": epoch + 1,
            "keep_rate": rate,
            "lr": lr,
            "train_loss_a": float(np.mean(np.concatenate(losses_a))),
            "train_loss_b": float(np.mean(np.concatenate(losses_b))),
            "val_f1_a": val_a,
            "val_f1_b": val_b,
        }
        history.append(record)
        logger.debug(
            f"Co-teaching epoch {epoch + 1}/{config.epochs}: keep {rate:.3f}, "
            f"loss a {record['train_loss_a']:.4f} b {record['train_loss_b']:.4f}, "
            f"val F1 a {val_a:.4f} b {val_b:.4f}"
        )

    if config.epochs == 0 and val_bags:
        val_a = _val_f1(model_a, val_bags, n_classes)
        val_b = _val_f1(model_b, val_bags, n_classes)
    chosen = "b" if (not math.isnan(val_b) and val_b > val_a) else "a"
    logger.info(f"Co-teaching finished: model {chosen} chosen (val F1 a {val_a:.4f}, b {val_b:.4f})")

    chosen_model = model_a if chosen == "a" else model_b
    candidates = extract_candidates(chosen_model, table, config.conf_threshold)
    return CoteachResult(
        model_a=model_a,
        model_b=model_b,
        chosen=chosen,
        candidates=candidates,
        history=history,
        selected_rows_a=np.concatenate(selected_a) if selected_a else np.zeros(0, dtype=np.int64),
        selected_rows_b=np.concatenate(selected_b) if selected_b else np.zeros(0, dtype=np.int64),
    )
