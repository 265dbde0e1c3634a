"""
Fusion Package

Architecture:
    binary_models.py    → one-vs-rest DPMIL models per subtype
    weighted_fusion.py  → weighted argmax, grid search, "fusion v1" reader / writer
"""

from .binary_models import BinaryModel, binary_labels, train_all_binaries, train_binary
from .weighted_fusion import (
    FusionConfig,
    FusionWeights,
    WeightedFusion,
    fuse,
    grid_search,
    read_fusion,
    write_fusion,
)

__all__ = [
    'BinaryModel',
    'FusionConfig',
    'FusionWeights',
    'WeightedFusion',
    'binary_labels',
    'fuse',
    'grid_search',
    'read_fusion',
    'train_all_binaries',
    'train_binary',
    'write_fusion',
]
