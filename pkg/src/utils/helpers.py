"""
Helper utility functions used throughout the pipeline.

Contains seed derivation, float formatting for text artifacts, checksums and
small numeric conveniences.
"""

import hashlib
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from src.utils.constants import FLOAT_FORMAT


def _name_to_int(name: Union[str, int]) -> int:
    if isinstance(name, (int, np.integer)):
        return int(name)
    digest = hashlib.sha256(str(name).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def derive_seed(seed: int, *names: Union[str, int]) -> int:
    """
    Derive a named sub-seed from a global seed.

    Each stage hashes its name into the seed so that it can be re-run on its
    own and still draw the same random numbers.

    Args:
        seed: Global seed
        names: Stage / component names or integer indices (epoch, class, ...)

    Returns:
        32-bit integer seed

    Example:
        >>> derive_seed(7, "coteach", "model_a") == derive_seed(7, "coteach", "model_a")
        True
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_name_to_int(n) for n in names]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def make_rng(seed: int, *names: Union[str, int]) -> np.random.Generator:
    """numpy Generator seeded from derive_seed()."""
    return np.random.default_rng(derive_seed(seed, *names))


def format_float(value: float) -> str:
    """Format a float with 17 significant digits, always with '.' decimals."""
    return FLOAT_FORMAT % float(value)


def format_floats(values: Iterable[float]) -> List[str]:
    return [FLOAT_FORMAT % float(v) for v in values]


def file_checksum(path: Union[str, Path]) -> str:
    """SHA-256 hex digest of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def argmax_lowest(values: Sequence[float]) -> int:
    """Index of the maximum, lowest index on ties."""
    return int(np.argmax(np.asarray(values)))


def batches(n: int, batch_size: int) -> List[slice]:
    """Consecutive slices covering range(n); the last may be short."""
    return [slice(start, min(start + batch_size, n)) for start in range(0, n, batch_size)]
