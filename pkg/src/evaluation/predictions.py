"""
Slide prediction files ("predictions v1").

    line 1: predictions v1
    line 2: bag_id,true_class,predicted_class,P_0,...,P_{M-1}
    then one row per bag
"""

from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from src.training.mil_trainer import SlidePrediction
from src.utils.constants import FLOAT_FORMAT, PREDICTIONS_MAGIC
from src.utils.validators import DataError, DataFormatError


def predictions_frame(predictions: Sequence[SlidePrediction]) -> pd.DataFrame:
    if not predictions:
        raise DataError("no predictions to write")
    n_classes = predictions[0].n_classes
    records = []
    for p in predictions:
        if p.n_classes != n_classes:
            raise DataError(f"prediction for {p.bag_id} has {p.n_classes} classes, expected {n_classes}")
        record = {
            "bag_id": p.bag_id,
            "true_class": -1 if p.true_class is None else int(p.true_class),
            "predicted_class": p.predicted_class,
        }
        for c, value in enumerate(p.probs):
            record[f"P_{c}"] = float(value)
        records.append(record)
    return pd.DataFrame(records)


def write_predictions(predictions: Sequence[SlidePrediction], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = predictions_frame(predictions).to_csv(index=False, lineterminator="\n", float_format=FLOAT_FORMAT)
    try:
        path.write_text(f"{PREDICTIONS_MAGIC}\n{body}", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot write predictions {path}: {e}") from e
    return path


def read_predictions(path: Union[str, Path]) -> List[SlidePrediction]:
    """
    Read a predictions file; the stored predicted_class is kept as-is.

    Raises:
        DataFormatError: Missing magic line or columns, unparseable rows
    """
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    if first != PREDICTIONS_MAGIC:
        raise DataFormatError(f"expected '{PREDICTIONS_MAGIC}', got {first!r}", line=1, path=path)
    try:
        frame = pd.read_csv(path, skiprows=1, dtype={"bag_id": str}, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFormatError(f"cannot parse predictions: {e}", path=path) from e

    missing = {"bag_id", "true_class", "predicted_class"} - set(frame.columns)
    prob_columns = [c for c in frame.columns if c.startswith("P_")]
    if missing or not prob_columns:
        raise DataFormatError(f"missing columns {sorted(missing) or 'P_*'}", line=2, path=path)

    predictions = []
    for row_no, rec in enumerate(frame.to_dict(orient="records"), start=3):
        try:
            truth = int(rec["true_class"])
            probs = np.array([float(rec[c]) for c in prob_columns], dtype=np.float64)
            predicted = int(rec["predicted_class"])
        except (TypeError, ValueError) as e:
            raise DataFormatError(f"bad value: {e}", line=row_no, path=path) from e
        predictions.append(SlidePrediction(
            bag_id=str(rec["bag_id"]),
            probs=probs,
            true_class=None if truth < 0 else truth,
            predicted=predicted,
        ))
    return predictions
