"""
Artifact layout of a run directory and the run manifest.

Every stage reads its inputs from, and writes its outputs to, one output
directory. The manifest ("manifest v1") lists each produced file with the
stage that wrote it, its SHA-256 and its size; re-running a stage replaces
its rows in place.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import pandas as pd

from src.utils.constants import MANIFEST_MAGIC, NUM_SUBTYPES, Subtype
from src.utils.helpers import file_checksum
from src.utils.validators import ArtifactMissingError, DataFormatError

MANIFEST_COLUMNS = ["stage", "file", "sha256", "bytes"]


@dataclass
class ArtifactPaths:
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)

    @property
    def dataset(self) -> Path:
        return self.root / "dataset.bags"

    @property
    def train(self) -> Path:
        return self.root / "train.bags"

    @property
    def val(self) -> Path:
        return self.root / "val.bags"

    def coteach_checkpoint(self, which: str) -> Path:
        return self.root / f"coteach-{which}.mlp"

    @property
    def coteach_chosen(self) -> Path:
        return self.root / "coteach-chosen.txt"

    @property
    def coteach_history(self) -> Path:
        return self.root / "coteach-history.csv"

    @property
    def coteach_selected(self) -> Path:
        return self.root / "coteach-selected.csv"

    @property
    def candidates(self) -> Path:
        return self.root / "candidates.txt"

    @property
    def discriminative(self) -> Path:
        return self.root / "discriminative.txt"

    @property
    def denoise_report(self) -> Path:
        return self.root / "denoise-report.csv"

    @property
    def finetune_checkpoint(self) -> Path:
        return self.root / "finetune.mlp"

    @property
    def finetune_history(self) -> Path:
        return self.root / "finetune-history.csv"

    @property
    def direct_predictions(self) -> Path:
        return self.root / "predictions-direct.csv"

    def binary_checkpoint(self, target: int) -> Path:
        name = Subtype(target).code if target < NUM_SUBTYPES else str(target)
        return self.root / f"binary-{name}.mlp"

    @property
    def fusion(self) -> Path:
        return self.root / "fusion.txt"

    @property
    def fused_predictions(self) -> Path:
        return self.root / "predictions-fused.csv"

    @property
    def metrics(self) -> Path:
        return self.root / "metrics.csv"

    @property
    def ablation(self) -> Path:
        return self.root / "ablation.csv"

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.csv"

    def require(self, path: Path, producer: str) -> Path:
        """
        Raises:
            ArtifactMissingError: path does not exist; names the producing stage
        """
        if not path.exists():
            raise ArtifactMissingError(path, producer)
        return path


class Manifest:
    """Ordered (stage, file) -> (sha256, bytes) table of produced files."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.entries: Dict[Tuple[str, str], Tuple[str, int]] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as f:
            first = f.readline().strip()
        if first != MANIFEST_MAGIC:
            raise DataFormatError(f"expected '{MANIFEST_MAGIC}', got {first!r}", line=1, path=self.path)
        frame = pd.read_csv(self.path, skiprows=1, dtype={"stage": str, "file": str, "sha256": str})
        for rec in frame.to_dict(orient="records"):
            self.entries[(rec["stage"], rec["file"])] = (rec["sha256"], int(rec["bytes"]))

    def record(self, stage: str, path: Path, root: Path) -> None:
        name = Path(path).relative_to(root).as_posix()
        self.entries[(stage, name)] = (file_checksum(path), Path(path).stat().st_size)

    def rows(self) -> List[dict]:
        return [
            {"stage": stage, "file": name, "sha256": digest, "bytes": size}
            for (stage, name), (digest, size) in self.entries.items()
        ]

    def save(self) -> Path:
        body = pd.DataFrame(self.rows(), columns=MANIFEST_COLUMNS).to_csv(index=False, lineterminator="\n")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(f"{MANIFEST_MAGIC}\n{body}", encoding="utf-8")
        return self.path
