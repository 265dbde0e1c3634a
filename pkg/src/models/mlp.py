"""
Dense feed-forward classifier with analytic gradients.

A small rectifier network stands in for the patch backbone: the pipeline only
needs per-patch losses, class confidences and penultimate-layer features, all
of which this provides.

Architecture (defaults):
    input (16) -> ReLU(32) -> ReLU(16) -> softmax(classes)

Shapes follow the row-major batch convention: a batch is (n, input_dim), a
weight matrix is (fan_in, fan_out).

Usage:
    model = MlpModel.build(input_dim=16, n_classes=4, seed=0)
    probs, features = forward(model, batch)
    losses = cross_entropy_batch(probs, labels)
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax as _scipy_softmax

from src.utils.constants import DEFAULT_HIDDEN_DIMS, LOG_CLAMP
from src.utils.validators import NumericError, ShapeError


@dataclass
class MlpModel:
    """
    Weights and biases of a dense classifier.

    layer_dims = (input dim, hidden dims..., class count). Hidden layers use a
    rectifier, the output layer a softmax.
    """
    layer_dims: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2:
            raise ShapeError(f"need at least input and output dims, got {self.layer_dims}")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError(
                f"{len(self.layer_dims) - 1} layers expected, got "
                f"{len(self.weights)} weight matrices and {len(self.biases)} bias vectors"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != expected:
                raise ShapeError(f"layer {i}: weight shape {w.shape}, expected {expected}")
            if b.shape != (expected[1],):
                raise ShapeError(f"layer {i}: bias shape {b.shape}, expected ({expected[1]},)")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericError("non-finite parameter", layer_index=i)

    @classmethod
    def initialise(cls, layer_dims: Sequence[int], seed: int) -> "MlpModel":
        """
        Seeded Glorot-uniform weights, zero biases.

        Each weight is drawn from U(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
        """
        rng = np.random.default_rng(seed)
        dims = tuple(int(d) for d in layer_dims)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(dims, weights, biases)

    @classmethod
    def zeros(cls, layer_dims: Sequence[int]) -> "MlpModel":
        dims = tuple(int(d) for d in layer_dims)
        weights = [np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])]
        biases = [np.zeros(b) for b in dims[1:]]
        return cls(dims, weights, biases)

    @classmethod
    def build(
        cls,
        input_dim: int,
        n_classes: int,
        hidden_dims: Sequence[int] = DEFAULT_HIDDEN_DIMS,
        seed: int = 0,
    ) -> "MlpModel":
        """Initialise a model with the given hidden layer sizes."""
        return cls.initialise((input_dim, *hidden_dims, n_classes), seed)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def feature_dim(self) -> int:
        """Width of the penultimate activation (the input width if there is no hidden layer)."""
        return self.layer_dims[-2]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MlpModel":
        return MlpModel(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in checkpoint order: W0, b0, W1, b1, ..."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def same_parameters(self, other: "MlpModel") -> bool:
        """Bit-exact parameter equality."""
        if self.layer_dims != other.layer_dims:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.parameters(), other.parameters()))


@dataclass
class Gradients:
    """Parameter gradients, same shapes as the model's weights and biases."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def arrays(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def scaled(self, factor: float) -> "Gradients":
        return Gradients([w * factor for w in self.weights], [b * factor for b in self.biases])


@dataclass
class ForwardCache:
    """Intermediate values of a forward pass, kept for backpropagation."""
    layer_inputs: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    probs: Optional[np.ndarray] = None

    @property
    def features(self) -> np.ndarray:
        """Penultimate activations (input to the output layer)."""
        return self.layer_inputs[-1]


def as_batch(batch, input_dim: Optional[int] = None) -> np.ndarray:
    """
    Coerce input to a finite (n, d) float64 matrix.

    Raises:
        ShapeError: If the batch is not 2-D or its width is not input_dim
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2:
        raise ShapeError(f"batch must be 2-D, got {x.ndim}-D")
    if input_dim is not None and x.shape[1] != input_dim:
        raise ShapeError(f"batch has {x.shape[1]} columns, model expects {input_dim}")
    if not np.all(np.isfinite(x)):
        raise NumericError("batch contains non-finite values")
    return x


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax; rows sum to 1 within 1e-12."""
    return _scipy_softmax(logits, axis=1)


def forward_cache(model: MlpModel, batch) -> ForwardCache:
    """Forward pass that keeps everything backpropagation needs."""
    x = as_batch(batch, model.input_dim)
    cache = ForwardCache()
    a = x
    last = model.n_layers - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        cache.layer_inputs.append(a)
        z = a @ w + b
        cache.pre_activations.append(z)
        if i < last:
            a = relu(z)
        else:
            cache.probs = softmax(z)
    return cache


def forward(model: MlpModel, batch) -> Tuple[np.ndarray, np.ndarray]:
    """
    Class probabilities and penultimate features for a batch.

    Args:
        model: Classifier
        batch: (n, input_dim) matrix

    Returns:
        (probs (n, n_classes), features (n, feature_dim))

    Raises:
        ShapeError: If the batch width differs from the model input dim
    """
    cache = forward_cache(model, batch)
    return cache.probs, cache.features


def cross_entropy(probs: Sequence[float], label: int) -> float:
    """
    Cross-entropy of one probability row against a class index.

    Returns:
        -log(max(probs[label], 1e-12))

    Raises:
        IndexError: If the label is out of range
    """
    row = np.asarray(probs, dtype=np.float64)
    label = int(label)
    if not 0 <= label < row.shape[0]:
        raise IndexError(f"label {label} out of range for {row.shape[0]} classes")
    return float(-np.log(max(row[label], LOG_CLAMP)))


def cross_entropy_batch(probs: np.ndarray, labels: Sequence[int]) -> np.ndarray:
    """Per-sample cross-entropy for a batch of probability rows."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != probs.shape[0]:
        raise ShapeError(f"{probs.shape[0]} probability rows but {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise IndexError(f"labels must lie in [0, {probs.shape[1]})")
    picked = probs[np.arange(labels.shape[0]), labels]
    return -np.log(np.maximum(picked, LOG_CLAMP))


def softmax_backward(probs: np.ndarray, dprobs: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. softmax outputs back to the logits."""
    inner = np.sum(dprobs * probs, axis=1, keepdims=True)
    return probs * (dprobs - inner)


def cross_entropy_logit_grad(probs: np.ndarray, labels: Sequence[int]) -> np.ndarray:
    """
    Gradient of the mean clamped cross-entropy w.r.t. the logits.

    Samples whose label probability sits below the clamp contribute zero.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = probs.shape[0]
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), labels] = 1.0
    active = probs[np.arange(n), labels] >= LOG_CLAMP
    return (probs - onehot) * active[:, None] / n


def backward(model: MlpModel, cache: ForwardCache, dlogits: np.ndarray) -> Gradients:
    """
    Backpropagate a logit gradient through the network.

    Raises:
        NumericError: If a gradient becomes non-finite (carries the layer index)
    """
    grads_w: List[Optional[np.ndarray]] = [None] * model.n_layers
    grads_b: List[Optional[np.ndarray]] = [None] * model.n_layers
    delta = dlogits
    for i in range(model.n_layers - 1, -1, -1):
        a_in = cache.layer_inputs[i]
        gw = a_in.T @ delta
        gb = delta.sum(axis=0)
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise NumericError("non-finite gradient", layer_index=i)
        grads_w[i] = gw
        grads_b[i] = gb
        if i > 0:
            delta = (delta @ model.weights[i].T) * (cache.pre_activations[i - 1] > 0)
    return Gradients(grads_w, grads_b)


def loss_and_gradients(model: MlpModel, batch, labels) -> Tuple[np.ndarray, Gradients]:
    """Per-sample losses and the gradient of their mean."""
    cache = forward_cache(model, batch)
    losses = cross_entropy_batch(cache.probs, labels)
    dlogits = cross_entropy_logit_grad(cache.probs, labels)
    return losses, backward(model, cache, dlogits)
