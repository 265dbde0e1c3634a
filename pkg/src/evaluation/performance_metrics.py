"""
Performance Metrics - confusion matrices and the four headline metrics.

Metrics per class c from the confusion matrix (rows = truth, cols = prediction):
    precision_c = TP / (TP + FP)        0/0 -> 0
    recall_c    = TP / (TP + FN)        0/0 -> 0
    F1_c        = 2 TP / (2 TP + FP + FN)  (harmonic mean of the two, 0/0 -> 0)
    macro F1    = unweighted mean of F1_c
    accuracy    = trace / total
Reported precision / recall are macro averages.

Report file:
    stage,accuracy,precision_macro,recall_macro,f1_macro,f1_A,f1_B,f1_H,f1_BL
    <one row per stage>
    <blank line>
    stage,truth,pred_0,...,pred_{M-1}
    <confusion rows per stage>
"""

import io
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix

from src.utils.constants import NUM_SUBTYPES, Subtype
from src.utils.helpers import format_float
from src.utils.logger import get_logger
from src.utils.validators import ArgumentError, DataError, DataFormatError

logger = get_logger("eval")


def _safe_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def f1_column_names(n_classes: int) -> List[str]:
    if n_classes == NUM_SUBTYPES:
        return [f"f1_{Subtype(c).code}" for c in range(n_classes)]
    return [f"f1_{c}" for c in range(n_classes)]


@dataclass(eq=False)
class MetricsReport:
    """Confusion matrix plus derived metrics for one experiment stage."""
    stage: str
    confusion: np.ndarray
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    precision_macro: float
    recall_macro: float
    f1_macro: float

    @classmethod
    def from_confusion(cls, confusion: np.ndarray, stage: str = "") -> "MetricsReport":
        cm = np.asarray(confusion, dtype=np.int64)
        if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
            raise ArgumentError(f"confusion matrix must be square, got shape {cm.shape}")
        total = int(cm.sum())
        if total == 0:
            raise ArgumentError("confusion matrix is empty")
        tp = np.diag(cm).astype(np.float64)
        fp = cm.sum(axis=0) - tp
        fn = cm.sum(axis=1) - tp
        precision = _safe_divide(tp, tp + fp)
        recall = _safe_divide(tp, tp + fn)
        f1 = _safe_divide(2.0 * tp, 2.0 * tp + fp + fn)
        return cls(
            stage=stage,
            confusion=cm,
            accuracy=float(tp.sum() / total),
            precision=precision,
            recall=recall,
            f1=f1,
            precision_macro=float(precision.mean()),
            recall_macro=float(recall.mean()),
            f1_macro=float(f1.mean()),
        )

    @property
    def n_classes(self) -> int:
        return int(self.confusion.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.confusion.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricsReport):
            return NotImplemented
        return (
            self.stage == other.stage
            and np.array_equal(self.confusion, other.confusion)
            and self.accuracy == other.accuracy
            and np.array_equal(self.precision, other.precision)
            and np.array_equal(self.recall, other.recall)
            and np.array_equal(self.f1, other.f1)
            and self.precision_macro == other.precision_macro
            and self.recall_macro == other.recall_macro
            and self.f1_macro == other.f1_macro
        )

    def summary(self) -> str:
        return (
            f"{self.stage or 'metrics'}: acc={self.accuracy:.3f} P={self.precision_macro:.3f} "
            f"R={self.recall_macro:.3f} F1={self.f1_macro:.3f} (n={self.n_samples})"
        )


def compute_metrics(
    predictions: Sequence[int],
    truths: Sequence[int],
    n_classes: int = NUM_SUBTYPES,
    stage: str = "",
) -> MetricsReport:
    """
    Metrics for paired predictions and ground truths.

    Raises:
        ArgumentError: Empty input or length mismatch
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape:
        raise ArgumentError(f"{predictions.size} predictions but {truths.size} truths")
    if predictions.size == 0:
        raise ArgumentError("cannot compute metrics on zero samples")
    cm = confusion_matrix(truths, predictions, labels=list(range(n_classes)))
    return MetricsReport.from_confusion(cm, stage=stage)


def macro_f1(predictions: Sequence[int], truths: Sequence[int], n_classes: int = NUM_SUBTYPES) -> float:
    return compute_metrics(predictions, truths, n_classes).f1_macro


def macro_f1_batch(predictions: np.ndarray, truths: Sequence[int], n_classes: int) -> np.ndarray:
    """
    Macro F1 for many prediction vectors at once.

    Args:
        predictions: (T, n) predicted classes, one row per candidate
        truths: n true classes

    Returns:
        (T,) macro F1 values, bit-identical to compute_metrics() per row
    """
    truths = np.asarray(truths, dtype=np.int64)
    f1 = np.zeros((predictions.shape[0], n_classes))
    for c in range(n_classes):
        pred_c = predictions == c
        true_c = (truths == c)[None, :]
        tp = np.sum(pred_c & true_c, axis=1).astype(np.float64)
        fp = np.sum(pred_c & ~true_c, axis=1).astype(np.float64)
        fn = np.sum(~pred_c & true_c, axis=1).astype(np.float64)
        f1[:, c] = _safe_divide(2.0 * tp, 2.0 * tp + fp + fn)
    return f1.mean(axis=1)


def accuracy_batch(predictions: np.ndarray, truths: Sequence[int]) -> np.ndarray:
    truths = np.asarray(truths, dtype=np.int64)
    return np.mean(predictions == truths[None, :], axis=1)


def _summary_frame(reports: Sequence[MetricsReport]) -> pd.DataFrame:
    n_classes = reports[0].n_classes
    rows = []
    for r in reports:
        row = {
            "stage": r.stage,
            "accuracy": format_float(r.accuracy),
            "precision_macro": format_float(r.precision_macro),
            "recall_macro": format_float(r.recall_macro),
            "f1_macro": format_float(r.f1_macro),
        }
        for name, value in zip(f1_column_names(n_classes), r.f1):
            row[name] = format_float(value)
        rows.append(row)
    return pd.DataFrame(rows)


def _confusion_frame(reports: Sequence[MetricsReport]) -> pd.DataFrame:
    n_classes = reports[0].n_classes
    rows = []
    for r in reports:
        for truth in range(n_classes):
            row = {"stage": r.stage, "truth": truth}
            for pred in range(n_classes):
                row[f"pred_{pred}"] = int(r.confusion[truth, pred])
            rows.append(row)
    return pd.DataFrame(rows)


def format_reports(reports: Sequence[MetricsReport]) -> str:
    if not reports:
        raise DataError("no reports to write")
    if len({r.n_classes for r in reports}) != 1:
        raise DataError("all reports in one file must have the same number of classes")
    summary = _summary_frame(reports).to_csv(index=False, lineterminator="\n")
    confusion = _confusion_frame(reports).to_csv(index=False, lineterminator="\n")
    return summary + "\n" + confusion


def read_report(path: Union[str, Path]) -> List[MetricsReport]:
    """
    Read every stage of a report file.

    Metrics are recomputed from the stored confusion matrices and checked
    against the summary rows.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    blocks = text.strip("\n").split("\n\n")
    if len(blocks) != 2:
        raise DataFormatError("expected a summary block and a confusion block", path=path)
    summary = pd.read_csv(io.StringIO(blocks[0]), dtype={"stage": str}, keep_default_na=False, float_precision="round_trip")
    confusion = pd.read_csv(io.StringIO(blocks[1]), dtype={"stage": str}, keep_default_na=False)

    reports = []
    for line_no, row in enumerate(summary.itertuples(index=False), start=2):
        stage_rows = confusion[confusion["stage"] == row.stage].sort_values("truth")
        if stage_rows.empty:
            raise DataFormatError(f"no confusion rows for stage {row.stage!r}", line=line_no, path=path)
        cm = stage_rows[[c for c in confusion.columns if c.startswith("pred_")]].to_numpy(dtype=np.int64)
        report = MetricsReport.from_confusion(cm, stage=row.stage)
        if abs(report.accuracy - float(row.accuracy)) > 1e-12 or abs(report.f1_macro - float(row.f1_macro)) > 1e-12:
            raise DataFormatError(f"summary of stage {row.stage!r} disagrees with its confusion matrix", line=line_no, path=path)
        reports.append(report)
    return reports


def write_report(report: MetricsReport, path: Union[str, Path]) -> Path:
    """
    Add (or replace) one stage in a report file, keeping stage order.

    Raises:
        DataError: I/O failure, naming the path
    """
    path = Path(path)
    reports: List[MetricsReport] = []
    if path.exists():
        reports = read_report(path)
    for i, existing in enumerate(reports):
        if existing.stage == report.stage:
            reports[i] = report
            break
    else:
        reports.append(report)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_reports(reports), encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot write report {path}: {e}") from e
    logger.info(report.summary())
    return path
