"""
Candidate discriminative patches.

A CandidateSet is the output of confidence selection after co-teaching and
the input / output of LOF denoising. Each row references one instance by
(bag_id, instance_index) and carries its penultimate-layer feature and the
model's confidence. Input features are attached in memory so fine-tuning can
train on them; they are not part of the file format and are re-joined from
the dataset when a set is read back.

File format ("candidates v1"):
    line 1: candidates v1 dim=<f>
    line 2: bag_id,instance_index,class_ordinal,confidence,feat0,...,feat{f-1}
    then one line per candidate
"""

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.data.bags import Bag, InstanceTable
from src.utils.constants import CANDIDATES_MAGIC
from src.utils.helpers import format_floats
from src.utils.logger import get_logger
from src.utils.validators import DataError, DataFormatError, ShapeError

logger = get_logger("features")

_HEADER = re.compile(r"^candidates v1 dim=(\d+)$")
_FIXED_FIELDS = 4


@dataclass
class CandidateSet:
    """Column view of candidate patches, grouped by class ordinal on demand."""
    bag_ids: np.ndarray
    instance_index: np.ndarray
    labels: np.ndarray
    confidence: np.ndarray
    features: np.ndarray
    inputs: Optional[np.ndarray] = None
    is_noise: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.labels.shape[0]
        for name in ("bag_ids", "instance_index", "confidence", "features"):
            if getattr(self, name).shape[0] != n:
                raise ShapeError(f"candidate column {name} has {getattr(self, name).shape[0]} rows, expected {n}")
        for name in ("inputs", "is_noise"):
            column = getattr(self, name)
            if column is not None and column.shape[0] != n:
                raise ShapeError(f"candidate column {name} has {column.shape[0]} rows, expected {n}")

    @classmethod
    def empty(cls, feature_dim: int, input_dim: Optional[int] = None) -> "CandidateSet":
        return cls(
            bag_ids=np.array([], dtype=object),
            instance_index=np.array([], dtype=np.int64),
            labels=np.array([], dtype=np.int64),
            confidence=np.array([], dtype=np.float64),
            features=np.zeros((0, feature_dim)),
            inputs=None if input_dim is None else np.zeros((0, input_dim)),
            is_noise=None if input_dim is None else np.zeros(0, dtype=bool),
        )

    @classmethod
    def from_table(
        cls, table: InstanceTable, rows: Sequence[int], features: np.ndarray, confidence: np.ndarray
    ) -> "CandidateSet":
        """Candidates for the given table rows; features / confidence are indexed by row."""
        rows = np.asarray(rows, dtype=np.int64)
        return cls(
            bag_ids=table.bag_ids[rows],
            instance_index=table.instance_index[rows],
            labels=table.labels[rows],
            confidence=np.asarray(confidence, dtype=np.float64)[rows],
            features=np.asarray(features, dtype=np.float64)[rows],
            inputs=table.features[rows],
            is_noise=table.is_noise[rows],
        )

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def has_inputs(self) -> bool:
        return self.inputs is not None

    def subset(self, rows: Sequence[int]) -> "CandidateSet":
        rows = np.asarray(rows, dtype=np.int64)
        return CandidateSet(
            bag_ids=self.bag_ids[rows],
            instance_index=self.instance_index[rows],
            labels=self.labels[rows],
            confidence=self.confidence[rows],
            features=self.features[rows],
            inputs=None if self.inputs is None else self.inputs[rows],
            is_noise=None if self.is_noise is None else self.is_noise[rows],
        )

    def of_class(self, label: int) -> "CandidateSet":
        return self.subset(np.flatnonzero(self.labels == label))

    def class_counts(self, n_classes: int) -> List[int]:
        return np.bincount(self.labels, minlength=n_classes)[:n_classes].tolist()

    def keys(self) -> List[tuple]:
        return list(zip(self.bag_ids.tolist(), self.instance_index.tolist()))

    @staticmethod
    def concat(parts: Sequence["CandidateSet"]) -> "CandidateSet":
        if not parts:
            raise DataError("cannot concatenate zero candidate sets")
        with_inputs = all(p.inputs is not None for p in parts)
        return CandidateSet(
            bag_ids=np.concatenate([p.bag_ids for p in parts]),
            instance_index=np.concatenate([p.instance_index for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
            confidence=np.concatenate([p.confidence for p in parts]),
            features=np.vstack([p.features for p in parts]),
            inputs=np.vstack([p.inputs for p in parts]) if with_inputs else None,
            is_noise=np.concatenate([p.is_noise for p in parts]) if with_inputs else None,
        )

    def attach_inputs(self, bags: Sequence[Bag]) -> "CandidateSet":
        """
        Copy of this set with input features joined from the dataset.

        Raises:
            DataError: A candidate references an instance the dataset lacks
        """
        lookup: Dict[tuple, tuple] = {}
        for bag in bags:
            for inst in bag.instances:
                lookup[(bag.bag_id, inst.index)] = (inst.features, inst.is_noise)
        inputs, noise = [], []
        for key in self.keys():
            if key not in lookup:
                raise DataError(f"candidate {key[0]}#{key[1]} is not in the dataset")
            features, is_noise = lookup[key]
            inputs.append(features)
            noise.append(is_noise)
        dim = bags[0].feature_dim if bags else 0
        return CandidateSet(
            bag_ids=self.bag_ids,
            instance_index=self.instance_index,
            labels=self.labels,
            confidence=self.confidence,
            features=self.features,
            inputs=np.vstack(inputs) if inputs else np.zeros((0, dim)),
            is_noise=np.array(noise, dtype=bool),
        )

    def to_table(self) -> InstanceTable:
        """Training view over the attached input features."""
        if self.inputs is None:
            raise DataError("candidate set has no input features attached")
        n = len(self)
        return InstanceTable(
            features=self.inputs,
            labels=self.labels.copy(),
            bag_ids=self.bag_ids.copy(),
            instance_index=self.instance_index.copy(),
            is_noise=self.is_noise.copy() if self.is_noise is not None else np.zeros(n, dtype=bool),
            augmented=np.zeros(n, dtype=bool),
            source_rows=np.arange(n),
        )


def format_candidates(candidates: CandidateSet) -> str:
    lines = [
        f"{CANDIDATES_MAGIC} dim={candidates.feature_dim}",
        ",".join(["bag_id", "instance_index", "class_ordinal", "confidence"]
                 + [f"feat{j}" for j in range(candidates.feature_dim)]),
    ]
    for i in range(len(candidates)):
        fields = [
            str(candidates.bag_ids[i]),
            str(int(candidates.instance_index[i])),
            str(int(candidates.labels[i])),
            *format_floats([candidates.confidence[i]]),
            *format_floats(candidates.features[i]),
        ]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def write_candidates(candidates: CandidateSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_candidates(candidates), encoding="utf-8")
    logger.debug(f"Candidates written: {path} ({len(candidates)} rows)")
    return path


def read_candidates(path: Union[str, Path]) -> CandidateSet:
    """
    Read a 'candidates v1' file (without input features).

    Raises:
        DataFormatError: Bad header, arity or values; the message names the line
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataFormatError("empty candidates file", line=1, path=path)
    match = _HEADER.match(lines[0].strip())
    if match is None:
        raise DataFormatError(f"expected header '{CANDIDATES_MAGIC} dim=<f>', got {lines[0]!r}", line=1, path=path)
    dim = int(match.group(1))
    arity = _FIXED_FIELDS + dim
    if len(lines) < 2 or not lines[1].startswith("bag_id,"):
        raise DataFormatError("missing column header", line=2, path=path)

    bag_ids, indices, labels, conf, feats = [], [], [], [], []
    for line_no, raw in enumerate(lines[2:], start=3):
        if not raw.strip():
            continue
        fields = raw.split(",")
        if len(fields) != arity:
            raise DataFormatError(f"expected {arity} fields, found {len(fields)}", line=line_no, path=path)
        try:
            indices.append(int(fields[1]))
            labels.append(int(fields[2]))
            conf.append(float(fields[3]))
            feats.append([float(v) for v in fields[_FIXED_FIELDS:]])
        except ValueError as e:
            raise DataFormatError(f"bad value: {e}", line=line_no, path=path) from e
        bag_ids.append(fields[0])

    return CandidateSet(
        bag_ids=np.array(bag_ids, dtype=object),
        instance_index=np.array(indices, dtype=np.int64),
        labels=np.array(labels, dtype=np.int64),
        confidence=np.array(conf, dtype=np.float64),
        features=np.array(feats, dtype=np.float64).reshape(len(feats), dim),
    )
