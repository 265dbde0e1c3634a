import numpy as np
import pytest

from src.data.bags import InstanceTable
from src.features.candidates import CandidateSet, read_candidates, write_candidates
from src.utils.validators import DataError, DataFormatError, ShapeError


@pytest.fixture
def bags(bag_factory):
    rng = np.random.default_rng(0)
    return [
        bag_factory("bag0", 0, rng.normal(size=(4, 3)), noise=[False, True, False, False]),
        bag_factory("bag1", 1, rng.normal(size=(3, 3))),
    ]


@pytest.fixture
def candidates(bags):
    table = InstanceTable.from_bags(bags)
    features = np.arange(len(table) * 2, dtype=float).reshape(len(table), 2) / 7.0
    confidence = np.linspace(0.5, 0.95, len(table))
    return CandidateSet.from_table(table, [0, 1, 4, 6], features, confidence)


def test_from_table_picks_rows(candidates, bags):
    assert candidates.keys() == [("bag0", 0), ("bag0", 1), ("bag1", 0), ("bag1", 2)]
    assert candidates.labels.tolist() == [0, 0, 1, 1]
    assert candidates.is_noise.tolist() == [False, True, False, False]
    assert np.array_equal(candidates.inputs[2], bags[1].instances[0].features)
    assert candidates.class_counts(2) == [2, 2]


def test_file_round_trip_drops_inputs_only(tmp_path, candidates):
    path = write_candidates(candidates, tmp_path / "candidates.txt")
    lines = path.read_text().splitlines()
    assert lines[0] == "candidates v1 dim=2"
    assert lines[1] == "bag_id,instance_index,class_ordinal,confidence,feat0,feat1"
    restored = read_candidates(path)
    assert restored.keys() == candidates.keys()
    assert np.array_equal(restored.features, candidates.features)
    assert np.array_equal(restored.confidence, candidates.confidence)
    assert not restored.has_inputs


def test_attach_inputs_rejoins_dataset(tmp_path, candidates, bags):
    restored = read_candidates(write_candidates(candidates, tmp_path / "c.txt")).attach_inputs(bags)
    assert np.array_equal(restored.inputs, candidates.inputs)
    assert restored.is_noise.tolist() == candidates.is_noise.tolist()


def test_attach_inputs_missing_instance(candidates, bag_factory):
    with pytest.raises(DataError, match="bag1#2"):
        candidates.attach_inputs([bag_factory("bag0", 0, np.zeros((4, 3))), bag_factory("bag1", 1, np.zeros((1, 3)))])


def test_empty_set_round_trip(tmp_path):
    path = write_candidates(CandidateSet.empty(4), tmp_path / "empty.txt")
    restored = read_candidates(path)
    assert len(restored) == 0
    assert restored.feature_dim == 4


def test_to_table_needs_inputs(tmp_path, candidates):
    table = candidates.to_table()
    assert len(table) == 4
    assert list(table.group_rows_by_bag()) == ["bag0", "bag1"]
    with pytest.raises(DataError):
        read_candidates(write_candidates(candidates, tmp_path / "c.txt")).to_table()


def test_column_lengths_must_agree():
    with pytest.raises(ShapeError):
        CandidateSet(
            bag_ids=np.array(["a"], dtype=object),
            instance_index=np.array([0, 1]),
            labels=np.array([0]),
            confidence=np.array([0.9]),
            features=np.zeros((1, 2)),
        )


@pytest.mark.parametrize("body, line", [
    ("candidates v2 dim=1\n", 1),
    ("candidates v1 dim=1\nwrong\n", 2),
    ("candidates v1 dim=1\nbag_id,instance_index,class_ordinal,confidence,feat0\nb,0,0,0.9\n", 3),
    ("candidates v1 dim=1\nbag_id,instance_index,class_ordinal,confidence,feat0\nb,0,0,0.9,1\nb,x,0,0.9,1\n", 4),
])
def test_malformed_files(tmp_path, body, line):
    path = tmp_path / "bad.txt"
    path.write_text(body)
    with pytest.raises(DataFormatError) as info:
        read_candidates(path)
    assert info.value.line == line
