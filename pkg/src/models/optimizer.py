"""
Minibatch SGD with the polynomial ("poly") learning-rate policy.

    lr(step) = lr0 * (1 - step / total_steps) ** power

The step counter advances once per minibatch, so total_steps is
epochs * batches_per_epoch.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.models.mlp import Gradients, MlpModel, as_batch, loss_and_gradients
from src.utils.constants import DEFAULT_BATCH_SIZE, DEFAULT_POLY_POWER
from src.utils.validators import NumericError, ShapeError, ValidationError


@dataclass
class OptimizerState:
    """Learning-rate schedule state for one model."""
    lr0: float
    total_steps: int
    power: float = DEFAULT_POLY_POWER
    step: int = 0
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.lr0 < 0:
            raise ValidationError(f"lr0 cannot be negative, got {self.lr0}")
        if self.power <= 0:
            raise ValidationError(f"power must be positive, got {self.power}")
        if self.total_steps < 0:
            raise ValidationError(f"total_steps cannot be negative, got {self.total_steps}")
        if not 0 <= self.step <= self.total_steps:
            raise ValidationError(f"step {self.step} outside [0, {self.total_steps}]")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be at least 1, got {self.batch_size}")

    def advance(self) -> None:
        self.step = min(self.step + 1, self.total_steps)

    @classmethod
    def for_schedule(
        cls,
        lr0: float,
        epochs: int,
        steps_per_epoch: int,
        power: float = DEFAULT_POLY_POWER,
        batch_size: int = DEFAULT_BATCH_SIZE,
    ) -> "OptimizerState":
        """State whose horizon covers epochs * steps_per_epoch minibatches."""
        return cls(
            lr0=lr0,
            total_steps=max(1, epochs * steps_per_epoch),
            power=power,
            batch_size=batch_size,
        )


def poly_lr(opt: OptimizerState) -> float:
    """
    Current learning rate under the poly policy.

    Examples:
        >>> poly_lr(OptimizerState(lr0=0.1, total_steps=100))
        0.1
        >>> round(poly_lr(OptimizerState(lr0=0.01, total_steps=10, step=5)), 7)
        0.0053589
    """
    if opt.total_steps == 0:
        return 0.0
    remaining = 1.0 - opt.step / opt.total_steps
    return float(opt.lr0 * max(remaining, 0.0) ** opt.power)


def apply_gradients(model: MlpModel, grads: Gradients, lr: float) -> MlpModel:
    """
    In-place update W <- W - lr * dW for every layer.

    Raises:
        NumericError: If an updated parameter is non-finite
    """
    for i, (gw, gb) in enumerate(zip(grads.weights, grads.biases)):
        if lr == 0.0:
            continue
        model.weights[i] -= lr * gw
        model.biases[i] -= lr * gb
        if not (np.all(np.isfinite(model.weights[i])) and np.all(np.isfinite(model.biases[i]))):
            raise NumericError("parameters diverged", layer_index=i)
    return model


def sgd_step(
    model: MlpModel,
    batch,
    labels: Sequence[int],
    opt: OptimizerState,
) -> Tuple[MlpModel, np.ndarray]:
    """
    One SGD update on the mean cross-entropy of a minibatch.

    The model is updated in place and returned; copy it first if the old
    parameters are still needed.

    Args:
        model: Classifier to update
        batch: (n, input_dim) inputs
        labels: n class indices
        opt: Schedule state; advanced by one step

    Returns:
        (model, per-sample losses computed before the update)

    Raises:
        ShapeError: If batch and labels disagree in length
        NumericError: If a gradient is non-finite (with layer index)
    """
    x = as_batch(batch, model.input_dim)
    labels = np.asarray(labels, dtype=np.int64)
    if x.shape[0] != labels.shape[0]:
        raise ShapeError(f"batch of {x.shape[0]} rows but {labels.shape[0]} labels")

    losses, grads = loss_and_gradients(model, x, labels)
    apply_gradients(model, grads, poly_lr(opt))
    opt.advance()
    return model, losses
