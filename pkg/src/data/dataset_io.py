"""
Dataset file reader / writer.

Format ("bags v1"):
    line 1: bags v1 dim=<d>
    then one line per instance:
        bag_id,class_ordinal,instance_index,is_noise(0|1),resolution_tag,f0,...,f{d-1}
Floats carry 17 significant digits so a write/read round trip is exact.
Instances of one bag are written consecutively; bags keep their order.
"""

import re
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from src.data.bags import Bag, Dataset, Instance
from src.utils.constants import DATASET_MAGIC, NUM_SUBTYPES, RESOLUTION_TAGS
from src.utils.helpers import format_floats
from src.utils.logger import get_logger
from src.utils.validators import DataError, DataFormatError

logger = get_logger("data")

_HEADER = re.compile(r"^bags v1 dim=(\d+)$")
_FIXED_FIELDS = 5


def format_dataset(bags: Sequence[Bag]) -> str:
    if not bags:
        raise DataError("cannot write an empty dataset")
    dim = bags[0].feature_dim
    lines = [f"{DATASET_MAGIC} dim={dim}"]
    for bag in bags:
        for inst in bag.instances:
            if inst.features.shape[0] != dim:
                raise DataError(f"bag {bag.bag_id} instance {inst.index} has dim {inst.features.shape[0]}, expected {dim}")
            fields = [
                bag.bag_id,
                str(bag.label),
                str(inst.index),
                "1" if inst.is_noise else "0",
                inst.resolution_tag,
                *format_floats(inst.features),
            ]
            lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def write_dataset(bags: Sequence[Bag], path: Union[str, Path]) -> Path:
    """Write bags to a 'bags v1' file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_dataset(bags), encoding="utf-8")
    logger.debug(f"Dataset written: {path} ({len(bags)} bags)")
    return path


def read_dataset(path: Union[str, Path], n_classes: int = NUM_SUBTYPES) -> Dataset:
    """
    Read a 'bags v1' file.

    Args:
        path: Dataset file
        n_classes: Class ordinals must lie in [0, n_classes)

    Raises:
        DataFormatError: Empty file, malformed header, wrong record arity or
            bad field values (including out-of-range class ordinals); the
            message names the line
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataFormatError("empty dataset file", line=1, path=path)
    match = _HEADER.match(lines[0].strip())
    if match is None:
        raise DataFormatError(f"expected header '{DATASET_MAGIC} dim=<d>', got {lines[0]!r}", line=1, path=path)
    dim = int(match.group(1))
    arity = _FIXED_FIELDS + dim

    order: List[str] = []
    labels: Dict[str, int] = {}
    members: Dict[str, List[Instance]] = {}

    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        fields = raw.split(",")
        if len(fields) != arity:
            raise DataFormatError(f"expected {arity} fields ({dim} features), found {len(fields)}", line=line_no, path=path)
        bag_id, label_s, index_s, noise_s, tag = fields[:_FIXED_FIELDS]
        try:
            label = int(label_s)
            index = int(index_s)
            features = np.array([float(v) for v in fields[_FIXED_FIELDS:]], dtype=np.float64)
        except ValueError as e:
            raise DataFormatError(f"bad value: {e}", line=line_no, path=path) from e
        if noise_s not in ("0", "1"):
            raise DataFormatError(f"is_noise must be 0 or 1, got {noise_s!r}", line=line_no, path=path)
        if tag not in RESOLUTION_TAGS:
            raise DataFormatError(f"unknown resolution tag {tag!r}", line=line_no, path=path)
        if not 0 <= label < n_classes:
            raise DataFormatError(
                f"class ordinal {label} outside [0, {n_classes})", line=line_no, path=path
            )

        if bag_id not in members:
            order.append(bag_id)
            members[bag_id] = []
            labels[bag_id] = label
        elif labels[bag_id] != label:
            raise DataFormatError(
                f"bag {bag_id} has class {label}, earlier lines say {labels[bag_id]}", line=line_no, path=path
            )
        members[bag_id].append(
            Instance(bag_id=bag_id, index=index, features=features, is_noise=noise_s == "1", resolution_tag=tag)
        )

    if not order:
        raise DataFormatError("dataset file has a header but no instances", line=2, path=path)
    return [Bag(bag_id, labels[bag_id], members[bag_id]) for bag_id in order]
