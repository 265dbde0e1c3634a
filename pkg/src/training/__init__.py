"""
Training Package

Architecture:
    coteaching.py      → peer training with small-loss exchange, candidate selection
    mil_trainer.py     → slide aggregation, slide loss, two-stage fine-tuning
    dpmil_pipeline.py  → all training steps chained in memory
"""

from .coteaching import (
    CoteachConfig,
    CoteachResult,
    extract_candidates,
    keep_rate,
    select_small_loss,
    train_coteach,
    train_single,
)
from .mil_trainer import (
    MilConfig,
    SlidePrediction,
    aggregate_slide,
    finetune_two_stage,
    predict_patches,
    predict_slide,
    slide_loss,
)
from .dpmil_pipeline import DpmilConfig, DpmilResult, run_dpmil

__all__ = [
    'CoteachConfig',
    'CoteachResult',
    'DpmilConfig',
    'DpmilResult',
    'MilConfig',
    'SlidePrediction',
    'aggregate_slide',
    'extract_candidates',
    'finetune_two_stage',
    'keep_rate',
    'predict_patches',
    'predict_slide',
    'run_dpmil',
    'select_small_loss',
    'slide_loss',
    'train_coteach',
    'train_single',
]
