import pytest

from src.data.bags import class_counts
from src.data.data_splitter import split, split_counts
from src.data.synthetic_generator import GenConfig, generate
from src.utils.constants import COHORT_CLASS_TOTALS
from src.utils.validators import ArgumentError, SplitError


def _cohort(bag_factory, counts):
    bags, n = [], 0
    for label, count in enumerate(counts):
        for _ in range(count):
            bags.append(bag_factory(f"b{n:05d}", label, [[float(n), 0.0]]))
            n += 1
    return bags


def test_default_cohort_split_counts():
    train, val = split(generate(GenConfig()), 0.8, seed=0)
    assert class_counts(train, 4) == [20, 24, 20, 16]
    assert class_counts(val, 4) == [5, 6, 5, 4]


def test_reference_cohort_totals(bag_factory):
    """Luminal B rounds to 306 where the reference cohort reports 298."""
    train, val = split(_cohort(bag_factory, COHORT_CLASS_TOTALS), 0.8, seed=1)
    assert class_counts(train, 4) == [250, 306, 253, 194]
    assert split_counts(COHORT_CLASS_TOTALS, 0.8) == [250, 306, 253, 194]
    assert len(train) + len(val) == 1254


def test_split_is_deterministic_and_disjoint(small_dataset):
    a_train, a_val = split(small_dataset, 0.8, seed=9)
    b_train, b_val = split(small_dataset, 0.8, seed=9)
    assert [b.bag_id for b in a_train] == [b.bag_id for b in b_train]
    assert [b.bag_id for b in a_val] == [b.bag_id for b in b_val]
    ids_train = {b.bag_id for b in a_train}
    ids_val = {b.bag_id for b in a_val}
    assert not ids_train & ids_val
    assert len(ids_train | ids_val) == len(small_dataset)


def test_split_seed_changes_membership(small_dataset):
    first, _ = split(small_dataset, 0.5, seed=1)
    second, _ = split(small_dataset, 0.5, seed=2)
    assert {b.bag_id for b in first} != {b.bag_id for b in second}


def test_both_sides_keep_every_class(bag_factory):
    train, val = split(_cohort(bag_factory, (2, 2, 3, 2)), 0.99, seed=0)
    assert all(c >= 1 for c in class_counts(train, 4))
    assert all(c >= 1 for c in class_counts(val, 4))


def test_class_with_one_bag_fails(bag_factory):
    with pytest.raises(SplitError):
        split(_cohort(bag_factory, (3, 1, 3, 3)), 0.8, seed=0)


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.2, 1.5])
def test_ratio_outside_unit_interval(small_dataset, ratio):
    with pytest.raises(ArgumentError):
        split(small_dataset, ratio, seed=0)
