"""
Constants used throughout the DPMIL pipeline.

This module contains the fixed class vocabulary (molecular subtypes),
resolution tags, file-format magic lines and numerical defaults shared by
every stage.
"""

from enum import Enum, IntEnum
from typing import Dict, Tuple


class Subtype(IntEnum):
    """
    Breast cancer molecular subtypes.

    The ordinal mapping is fixed and used in every file format:
    0 = Luminal A, 1 = Luminal B, 2 = Her-2, 3 = Basal-like.
    """
    LUMINAL_A = 0
    LUMINAL_B = 1
    HER2 = 2
    BASAL_LIKE = 3

    @property
    def code(self) -> str:
        """Short code used in report column names."""
        return SUBTYPE_CODES[self]

    @property
    def display_name(self) -> str:
        return SUBTYPE_NAMES[self]


SUBTYPE_CODES: Dict[Subtype, str] = {
    Subtype.LUMINAL_A: "A",
    Subtype.LUMINAL_B: "B",
    Subtype.HER2: "H",
    Subtype.BASAL_LIKE: "BL",
}

SUBTYPE_NAMES: Dict[Subtype, str] = {
    Subtype.LUMINAL_A: "Luminal A",
    Subtype.LUMINAL_B: "Luminal B",
    Subtype.HER2: "Her-2",
    Subtype.BASAL_LIKE: "Basal-like",
}

NUM_SUBTYPES = len(Subtype)


class Resolution(Enum):
    """Magnification tags. Metadata only, never changes features."""
    X5 = "5X"
    X10 = "10X"
    X20 = "20X"


RESOLUTION_TAGS: Tuple[str, ...] = tuple(r.value for r in Resolution)

# One-vs-rest models: ordinal 0 is the pooled rest, ordinal 1 the target subtype
BINARY_REST = 0
BINARY_TARGET = 1
NUM_BINARY_CLASSES = 2

# Slide counts per subtype in the reference cohort (train + test)
COHORT_CLASS_TOTALS: Tuple[int, int, int, int] = (313, 382, 316, 243)

# Numerical guards
LOG_CLAMP = 1e-12
FLOAT_FORMAT = "%.17g"  # round-trip exact for float64

# File-format magic lines
DATASET_MAGIC = "bags v1"
CHECKPOINT_MAGIC = "mlp v1"
CANDIDATES_MAGIC = "candidates v1"
DENOISE_REPORT_MAGIC = "denoise-report v1"
PREDICTIONS_MAGIC = "predictions v1"
FUSION_MAGIC = "fusion v1"
ABLATION_MAGIC = "ablation v1"
MANIFEST_MAGIC = "manifest v1"

# Training defaults
DEFAULT_HIDDEN_DIMS: Tuple[int, ...] = (32, 16)
DEFAULT_BATCH_SIZE = 32
DEFAULT_POLY_POWER = 0.9
AUGMENT_SIGMA_SCALE = 0.05  # resample jitter in units of the generator's cluster_spread
REFERENCE_FUSION_WEIGHTS: Tuple[float, float, float, float] = (0.6, 0.9, 0.5, 0.7)
ALPHA_SWEEP: Tuple[float, ...] = (0.0, 0.5, 1.0, 2.0)

# Environment variables
THREADS_ENV = "DPMIL_THREADS"
LOG_LEVEL_ENV = "DPMIL_LOG_LEVEL"
