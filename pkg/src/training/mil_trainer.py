"""
Two-stage multi-instance fine-tuning and slide-level prediction.

Slide confidence is the mean of its patches' probability rows:
    P_c = (1 / N_p) * sum_i p_{i,c}
The slide loss of one bag is -log P_label (clamped), and a set of slides
contributes alpha * mean of those terms.

Each fine-tuning epoch runs
    stage 1: patch-level cross-entropy SGD over all discriminative patches
    stage 2: one update per bag on alpha * (-log P_label), backpropagated
             through the mean, i.e. -alpha / (P_label * N_p) into the label
             column of every patch's softmax row
Stage 2 has its own shuffle stream and learning-rate schedule, so alpha = 0
leaves the stage-1 trajectory untouched.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.data.bags import Bag
from src.features.candidates import CandidateSet
from src.models.gradient_check import check_gradients
from src.models.mlp import (
    Gradients,
    MlpModel,
    as_batch,
    backward,
    cross_entropy,
    forward,
    forward_cache,
    softmax_backward,
)
from src.models.optimizer import OptimizerState, apply_gradients, poly_lr, sgd_step
from src.evaluation.performance_metrics import MetricsReport, compute_metrics
from src.utils.constants import DEFAULT_BATCH_SIZE, DEFAULT_POLY_POWER, LOG_CLAMP
from src.utils.helpers import argmax_lowest, batches, make_rng
from src.utils.logger import get_logger
from src.utils.validators import (
    AggregationError,
    ArgumentError,
    ValidationError,
    validate_count,
    validate_positive,
)

logger = get_logger("mil")


@dataclass
class MilConfig:
    alpha: float = 0.5
    epochs: int = 10
    batch_size: int = DEFAULT_BATCH_SIZE
    lr0: float = 0.01
    power: float = DEFAULT_POLY_POWER
    seed: int = 0

    def validate(self) -> "MilConfig":
        if self.alpha < 0:
            raise ValidationError(f"mil.alpha cannot be negative, got {self.alpha}")
        validate_count(self.epochs, "mil.epochs")
        validate_count(self.batch_size, "mil.batch_size", minimum=1)
        validate_positive(self.lr0, "mil.lr0", allow_zero=True)
        validate_positive(self.power, "mil.power")
        return self


@dataclass(eq=False)
class SlidePrediction:
    """
    Mean patch confidence of one bag and the resulting class.

    `predicted` overrides the argmax when the class comes from elsewhere
    (fused predictions carry raw binary confidences in probs).
    """
    bag_id: str
    probs: np.ndarray
    true_class: Optional[int] = None
    predicted: Optional[int] = None

    @property
    def predicted_class(self) -> int:
        if self.predicted is not None:
            return int(self.predicted)
        return argmax_lowest(self.probs)

    @property
    def n_classes(self) -> int:
        return int(self.probs.shape[0])


@dataclass
class BagPatches:
    """Discriminative patch inputs of one training bag (possibly none)."""
    bag_id: str
    label: int
    inputs: np.ndarray

    def __len__(self) -> int:
        return int(self.inputs.shape[0])


def aggregate_slide(rows) -> np.ndarray:
    """
    Mean of a bag's patch probability rows.

    Raises:
        AggregationError: The bag has no rows

    Example:
        >>> aggregate_slide([[0.6, 0.4], [0.8, 0.2]])
        array([0.7, 0.3])
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise AggregationError("cannot aggregate an empty bag")
    return rows.mean(axis=0)


def slide_loss(probs: Sequence[float], label: int, alpha: float = 1.0, n_slides: int = 1) -> float:
    """
    One slide's contribution to the batch slide loss: alpha * (-log P_label) / n_slides.

    Summing the contributions of n_slides slides gives alpha times the mean term.
    """
    if n_slides < 1:
        raise ArgumentError(f"n_slides must be at least 1, got {n_slides}")
    return alpha * cross_entropy(probs, label) / n_slides


def global_slide_loss(slide_probs: np.ndarray, labels: Sequence[int], alpha: float = 1.0) -> float:
    """alpha * mean over slides of -log P_label."""
    slide_probs = np.asarray(slide_probs, dtype=np.float64)
    labels = list(labels)
    if not labels:
        raise AggregationError("no slides to score")
    return float(sum(slide_loss(p, y, alpha, len(labels)) for p, y in zip(slide_probs, labels)))


def slide_loss_gradients(model: MlpModel, inputs, label: int, alpha: float = 1.0) -> Tuple[float, Gradients]:
    """
    alpha * (-log P_label) for one bag and its gradient w.r.t. every parameter.

    A label probability below the clamp contributes zero gradient.
    """
    cache = forward_cache(model, inputs)
    slide = aggregate_slide(cache.probs)
    loss = slide_loss(slide, label, alpha)
    n_patches = cache.probs.shape[0]
    dprobs = np.zeros_like(cache.probs)
    if slide[label] >= LOG_CLAMP:
        dprobs[:, label] = -alpha / (slide[label] * n_patches)
    dlogits = softmax_backward(cache.probs, dprobs)
    return loss, backward(model, cache, dlogits)


def slide_grad_check(model: MlpModel, inputs, label: int, alpha: float = 1.0, epsilon: float = 1e-5) -> float:
    """Max relative error of the slide-loss gradient against central differences."""
    x = as_batch(inputs, model.input_dim)

    def loss_fn(m: MlpModel) -> float:
        probs, _ = forward(m, x)
        return slide_loss(aggregate_slide(probs), label, alpha)

    _, grads = slide_loss_gradients(model, x, label, alpha)
    return check_gradients(model, loss_fn, grads, epsilon)


def predict_patches(model: MlpModel, bag: Bag) -> Tuple[np.ndarray, np.ndarray]:
    """Per-instance probability rows and argmax classes (lowest index on ties)."""
    probs, _ = forward(model, bag.feature_matrix())
    return probs, np.argmax(probs, axis=1)


def predict_slide(model: MlpModel, bag: Bag) -> SlidePrediction:
    """Aggregate all of a bag's instances into one slide prediction."""
    if len(bag.instances) == 0:
        raise AggregationError(f"bag {bag.bag_id} has no instances")
    probs, _ = predict_patches(model, bag)
    return SlidePrediction(bag.bag_id, aggregate_slide(probs), true_class=bag.label)


def predict_slides(model: MlpModel, bags: Sequence[Bag]) -> List[SlidePrediction]:
    return [predict_slide(model, bag) for bag in bags]


def slide_metrics(model: MlpModel, bags: Sequence[Bag], n_classes: int, stage: str = "") -> MetricsReport:
    preds = predict_slides(model, bags)
    return compute_metrics([p.predicted_class for p in preds], [b.label for b in bags], n_classes, stage)


def patch_metrics(model: MlpModel, bags: Sequence[Bag], n_classes: int, stage: str = "") -> MetricsReport:
    """Instance predictions scored against their bag labels."""
    predicted, truths = [], []
    for bag in bags:
        _, classes = predict_patches(model, bag)
        predicted.append(classes)
        truths.append(np.full(len(bag), bag.label, dtype=np.int64))
    return compute_metrics(np.concatenate(predicted), np.concatenate(truths), n_classes, stage)


def group_patches(patches: CandidateSet, train_bags: Optional[Sequence[Bag]] = None) -> List[BagPatches]:
    """
    Group candidate inputs by bag.

    With train_bags given, every training bag gets a group (empty when none of
    its patches survived) in dataset order; otherwise groups follow first
    appearance in the candidate set.
    """
    table = patches.to_table()
    rows_by_bag: Dict[str, np.ndarray] = table.group_rows_by_bag()
    empty = np.zeros((0, table.feature_dim))
    if train_bags is None:
        return [
            BagPatches(bag_id, int(table.labels[rows[0]]), table.features[rows])
            for bag_id, rows in rows_by_bag.items()
        ]
    groups = []
    for bag in train_bags:
        rows = rows_by_bag.get(bag.bag_id)
        groups.append(BagPatches(bag.bag_id, bag.label, table.features[rows] if rows is not None else empty))
    return groups


def finetune_two_stage(
    init_model: MlpModel,
    patches: Sequence[BagPatches],
    val_bags: Sequence[Bag],
    config: MilConfig,
    n_classes: Optional[int] = None,
    history: Optional[List[dict]] = None,
    progress: bool = False,
) -> MlpModel:
    """
    Fine-tune a copy of init_model on discriminative patches.

    Args:
        init_model: Chosen co-teaching model
        patches: Discriminative patches grouped by bag
        val_bags: Bags scored after every epoch (may be empty)
        config: alpha, epochs, batch size, schedule, seed
        n_classes: Class count for validation metrics (defaults to model outputs)
        history: If given, one dict per epoch is appended
        progress: Show a tqdm bar over epochs

    Returns:
        Fine-tuned model (init_model itself is not modified)
    """
    config.validate()
    model = init_model.copy()
    n_classes = n_classes or model.n_classes
    if config.epochs == 0:
        return model

    usable = [g for g in patches if len(g) > 0]
    excluded = len(patches) - len(usable)
    if excluded:
        logger.warning(f"{excluded} bag(s) have no discriminative patches and are excluded from stage 2")

    x_all = np.vstack([g.inputs for g in usable]) if usable else np.zeros((0, model.input_dim))
    y_all = np.concatenate([np.full(len(g), g.label, dtype=np.int64) for g in usable]) if usable else np.zeros(0, dtype=np.int64)
    if x_all.shape[0] == 0:
        logger.warning("No discriminative patches to fine-tune on; returning the initial model")
        return model

    n_batches = math.ceil(x_all.shape[0] / config.batch_size)
    opt_patch = OptimizerState.for_schedule(config.lr0, config.epochs, n_batches, config.power, config.batch_size)
    opt_slide = OptimizerState.for_schedule(config.lr0, config.epochs, len(usable), config.power, 1)
    rng_patch = make_rng(config.seed, "mil", "stage1")
    rng_slide = make_rng(config.seed, "mil", "stage2")

    for epoch in tqdm(range(config.epochs), desc="finetune", disable=not progress, leave=False):
        order = rng_patch.permutation(x_all.shape[0])
        patch_losses = []
        for sl in batches(order.size, config.batch_size):
            idx = order[sl]
            _, losses = sgd_step(model, x_all[idx], y_all[idx], opt_patch)
            patch_losses.append(losses)

        bag_order = rng_slide.permutation(len(usable))
        slide_terms = []
        if config.alpha > 0:
            for b in bag_order:
                group = usable[b]
                loss, grads = slide_loss_gradients(model, group.inputs, group.label, config.alpha)
                apply_gradients(model, grads, poly_lr(opt_slide))
                opt_slide.advance()
                slide_terms.append(loss)

        record = {
            "epoch": epoch + 1,
            "patch_loss": float(np.mean(np.concatenate(patch_losses))),
            "slide_loss": float(np.mean(slide_terms)) if slide_terms else 0.0,
            "excluded_bags": excluded,
            "val_f1": float("nan"),
        }
        if val_bags:
            record["val_f1"] = slide_metrics(model, val_bags, n_classes).f1_macro
        if history is not None:
            history.append(record)
        logger.debug(
            f"Fine-tune epoch {epoch + 1}/{config.epochs}: patch loss {record['patch_loss']:.4f}, "
            f"slide loss {record['slide_loss']:.4f}, val F1 {record['val_f1']:.4f}"
        )

    return model
