"""
Finite-difference validation of analytic gradients.

Every parameter is nudged by +/- epsilon and the central difference of the
loss is compared with the analytic gradient. The relative error uses
max(|analytic|, |numeric|, abs_floor) as denominator so that it stays defined
(and becomes an absolute error) where the gradient vanishes.
"""

from typing import Callable, Sequence

import numpy as np

from src.models.mlp import Gradients, MlpModel, cross_entropy_batch, forward, loss_and_gradients
from src.utils.validators import ArgumentError

ABS_FLOOR = 1e-4


def relative_error(analytic: np.ndarray, numeric: np.ndarray, abs_floor: float = ABS_FLOOR) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), abs_floor)
    return np.abs(analytic - numeric) / denom


def check_gradients(
    model: MlpModel,
    loss_fn: Callable[[MlpModel], float],
    grads: Gradients,
    epsilon: float,
    abs_floor: float = ABS_FLOOR,
) -> float:
    """
    Compare analytic gradients of an arbitrary scalar loss with central differences.

    Args:
        model: Point of evaluation (left unchanged)
        loss_fn: Scalar loss as a function of the model
        grads: Analytic gradients at the same point
        epsilon: Perturbation size, in (0, 1e-3]

    Returns:
        Maximum relative error over all parameters
    """
    if not 0.0 < epsilon <= 1e-3:
        raise ArgumentError(f"epsilon must lie in (0, 1e-3], got {epsilon}")

    perturbed = model.copy()
    worst = 0.0
    for param, analytic in zip(perturbed.parameters(), grads.arrays()):
        numeric = np.zeros_like(param)
        flat = param.reshape(-1)
        flat_numeric = numeric.reshape(-1)
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + epsilon
            plus = loss_fn(perturbed)
            flat[j] = original - epsilon
            minus = loss_fn(perturbed)
            flat[j] = original
            flat_numeric[j] = (plus - minus) / (2.0 * epsilon)
        if numeric.size:
            worst = max(worst, float(np.max(relative_error(analytic, numeric, abs_floor))))
    return worst


def grad_check(model: MlpModel, batch, labels: Sequence[int], epsilon: float = 1e-5) -> float:
    """
    Max relative error between backprop and finite differences of the mean cross-entropy.

    Example:
        >>> model = MlpModel.build(5, 4, hidden_dims=(4, 3), seed=1)
        >>> grad_check(model, np.random.default_rng(1).normal(size=(6, 5)), [0, 1, 2, 3, 0, 1]) < 1e-5
        True
    """
    x = np.asarray(batch, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)

    def mean_loss(m: MlpModel) -> float:
        probs, _ = forward(m, x)
        return float(np.mean(cross_entropy_batch(probs, labels)))

    _, grads = loss_and_gradients(model, x, labels)
    return check_gradients(model, mean_loss, grads, epsilon)
