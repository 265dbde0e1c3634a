import numpy as np
import pytest

from src.evaluation.predictions import read_predictions, write_predictions
from src.training.mil_trainer import SlidePrediction
from src.utils.validators import DataError, DataFormatError


def _predictions():
    return [
        SlidePrediction("bag0", np.array([0.1, 0.2, 0.3, 0.4]), true_class=3),
        SlidePrediction("bag1", np.array([0.7, 0.1, 0.1, 0.1]), true_class=None),
        SlidePrediction("bag2", np.array([0.9, 0.8, 0.2, 0.1]), true_class=1, predicted=1),
    ]


def test_round_trip(tmp_path):
    path = write_predictions(_predictions(), tmp_path / "pred.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "predictions v1"
    assert lines[1] == "bag_id,true_class,predicted_class,P_0,P_1,P_2,P_3"
    assert lines[3].startswith("bag1,-1,0,")

    back = read_predictions(path)
    assert [p.bag_id for p in back] == ["bag0", "bag1", "bag2"]
    assert [p.true_class for p in back] == [3, None, 1]
    assert [p.predicted_class for p in back] == [3, 0, 1]
    for original, restored in zip(_predictions(), back):
        np.testing.assert_array_equal(original.probs, restored.probs)


def test_numeric_looking_bag_ids_stay_strings(tmp_path):
    path = write_predictions([SlidePrediction("007", np.array([0.5, 0.5]), 0)], tmp_path / "p.csv")
    assert read_predictions(path)[0].bag_id == "007"


def test_missing_magic_line(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("bag_id,true_class,predicted_class,P_0\nb,0,0,1.0\n")
    with pytest.raises(DataFormatError, match="line 1"):
        read_predictions(path)


def test_missing_columns(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("predictions v1\nbag_id,true_class\nb,0\n")
    with pytest.raises(DataFormatError, match="line 2"):
        read_predictions(path)


def test_mixed_class_counts_are_rejected(tmp_path):
    mixed = [SlidePrediction("a", np.array([0.5, 0.5])), SlidePrediction("b", np.array([0.2, 0.3, 0.5]))]
    with pytest.raises(DataError):
        write_predictions(mixed, tmp_path / "p.csv")
    with pytest.raises(DataError):
        write_predictions([], tmp_path / "p.csv")
