"""
Models Package

Dense numeric core of the pipeline.

Architecture:
    mlp.py             → MlpModel, forward pass, softmax / cross-entropy, backprop
    optimizer.py       → OptimizerState, poly learning rate, sgd_step
    gradient_check.py  → finite-difference gradient validation
    checkpoint.py      → "mlp v1" text checkpoints

Usage:
    from src.models import MlpModel, OptimizerState, forward, sgd_step

    model = MlpModel.build(input_dim=16, n_classes=4, seed=0)
    opt = OptimizerState.for_schedule(lr0=0.01, epochs=20, steps_per_epoch=100)
    model, losses = sgd_step(model, batch, labels, opt)
"""

from .mlp import (
    ForwardCache,
    Gradients,
    MlpModel,
    backward,
    cross_entropy,
    cross_entropy_batch,
    forward,
    forward_cache,
    softmax,
)
from .optimizer import OptimizerState, apply_gradients, poly_lr, sgd_step
from .gradient_check import check_gradients, grad_check
from .checkpoint import read_checkpoint, write_checkpoint

__all__ = [
    'ForwardCache',
    'Gradients',
    'MlpModel',
    'OptimizerState',
    'apply_gradients',
    'backward',
    'check_gradients',
    'cross_entropy',
    'cross_entropy_batch',
    'forward',
    'forward_cache',
    'grad_check',
    'poly_lr',
    'read_checkpoint',
    'sgd_step',
    'softmax',
    'write_checkpoint',
]
