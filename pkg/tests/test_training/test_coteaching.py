from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.data.bags import InstanceTable
from src.data.data_splitter import split
from src.data.resampler import ResampleConfig
from src.data.synthetic_generator import GenConfig, generate
from src.models.mlp import MlpModel
from src.training.coteaching import (
    CoteachConfig,
    extract_candidates,
    keep_count,
    keep_rate,
    select_small_loss,
    train_coteach,
    train_single,
)
from src.utils.validators import ArgumentError, ConfigError


@pytest.mark.parametrize("epoch, expected", [(0, 1.0), (5, 0.8), (10, 0.6), (25, 0.6)])
def test_keep_rate_ramp_and_plateau(epoch, expected):
    assert keep_rate(epoch, 0.4, 10) == pytest.approx(expected)


def test_keep_rate_rejects_negative_epoch():
    with pytest.raises(ArgumentError):
        keep_rate(-1, 0.4, 10)


@pytest.mark.parametrize("epoch, expected", [(0, 1.0), (3, 1.0), (4, 0.9), (5, 0.8), (8, 0.6), (30, 0.6)])
def test_keep_rate_holds_through_warmup(epoch, expected):
    assert keep_rate(epoch, 0.4, 4, warmup_epochs=3) == pytest.approx(expected)


def test_warmup_keeps_whole_batches(small_split, fast_coteach):
    train, val = small_split
    config = replace(fast_coteach, warmup_epochs=2)
    result = train_coteach(train, val, config, 4)
    assert [h["keep_rate"] for h in result.history] == pytest.approx([1.0, 1.0, 1.0])
    assert result.selected_rows_a.size == len(InstanceTable.from_bags(train))


def test_negative_warmup_is_rejected(fast_coteach):
    with pytest.raises(ConfigError):
        replace(fast_coteach, warmup_epochs=-1).validate()


@pytest.mark.parametrize("rate, n, expected", [(1.0, 32, 32), (0.8, 32, 26), (0.6, 10, 6), (0.01, 5, 1)])
def test_keep_count_rounds_up(rate, n, expected):
    assert keep_count(rate, n) == expected


def test_select_small_loss_examples():
    assert select_small_loss([0.1, 2.0, 0.05, 1.5], 2).tolist() == [0, 2]
    assert select_small_loss([0.1, 2.0, 0.05, 1.5], 4).tolist() == [0, 1, 2, 3]
    assert select_small_loss([0.3, 0.3, 0.9], 1).tolist() == [0]


@pytest.mark.parametrize("keep", [0, 5])
def test_select_small_loss_range(keep):
    with pytest.raises(ArgumentError):
        select_small_loss([0.1, 0.2, 0.3, 0.4], keep)


@settings(max_examples=60, deadline=None)
@given(
    losses=st.lists(st.sampled_from([0.0, 0.25, 0.5, 1.0, 2.0, 7.5]), min_size=1, max_size=40),
    data=st.data(),
)
def test_select_small_loss_matches_sorted_take(losses, data):
    keep = data.draw(st.integers(1, len(losses)))
    ranked = sorted(range(len(losses)), key=lambda i: (losses[i], i))
    assert select_small_loss(losses, keep).tolist() == sorted(ranked[:keep])


def test_zero_forget_rate_equals_plain_training(small_split, fast_coteach):
    """With tau = 0 each peer sees every sample, exactly like a plain run."""
    train, val = small_split
    config = replace(fast_coteach, forget_rate=0.0)
    resample = ResampleConfig(seed=2)
    result = train_coteach(train, val, config, 4, resample)
    seed_a, seed_b = config.resolved_model_seeds()
    assert result.model_a.same_parameters(train_single(train, val, config, 4, model_seed=seed_a, resample=resample))
    assert result.model_b.same_parameters(train_single(train, val, config, 4, model_seed=seed_b, resample=resample))


def test_swapping_model_seeds_swaps_models(small_split, fast_coteach):
    train, val = small_split
    forward_run = train_coteach(train, val, replace(fast_coteach, model_seeds=(101, 202)), 4)
    swapped_run = train_coteach(train, val, replace(fast_coteach, model_seeds=(202, 101)), 4)
    assert forward_run.model_a.same_parameters(swapped_run.model_b)
    assert forward_run.model_b.same_parameters(swapped_run.model_a)


def test_zero_epochs_keeps_initial_models(small_split, fast_coteach):
    train, val = small_split
    config = replace(fast_coteach, epochs=0)
    result = train_coteach(train, val, config, 4)
    seed_a, seed_b = config.resolved_model_seeds()
    dim = train[0].feature_dim
    assert result.model_a.same_parameters(MlpModel.build(dim, 4, config.hidden_dims, seed_a))
    assert result.model_b.same_parameters(MlpModel.build(dim, 4, config.hidden_dims, seed_b))
    assert result.history == []


def test_coteach_is_deterministic(small_split, fast_coteach):
    train, val = small_split
    first = train_coteach(train, val, fast_coteach, 4, ResampleConfig(seed=1))
    second = train_coteach(train, val, fast_coteach, 4, ResampleConfig(seed=1))
    assert first.model_a.same_parameters(second.model_a)
    assert first.chosen == second.chosen
    assert first.candidates.keys() == second.candidates.keys()
    assert len(first.history) == fast_coteach.epochs
    assert [h["keep_rate"] for h in first.history] == pytest.approx([1.0, 0.9, 0.8])


def test_final_epoch_selection_sizes(small_split, fast_coteach):
    train, val = small_split
    result = train_coteach(train, val, fast_coteach, 4)
    n = len(InstanceTable.from_bags(train))
    rate = keep_rate(fast_coteach.epochs - 1, fast_coteach.forget_rate, fast_coteach.ramp_epochs)
    expected = sum(
        keep_count(rate, min(fast_coteach.batch_size, n - start)) for start in range(0, n, fast_coteach.batch_size)
    )
    assert result.selected_rows_a.size == expected
    assert result.selected_rows_b.size == expected
    assert result.chosen in ("a", "b")


def test_empty_training_set(fast_coteach):
    with pytest.raises(ConfigError):
        train_coteach([], [], fast_coteach, 4)


def test_forget_rate_is_required(small_split, fast_coteach):
    train, val = small_split
    with pytest.raises(ConfigError):
        train_coteach(train, val, replace(fast_coteach, forget_rate=None), 4)


def _confident_model():
    """One input, two classes; predicts class 1 with probability ~0.99995 for input 1."""
    return MlpModel((1, 2), [np.array([[0.0, 10.0]])], [np.zeros(2)])


def test_confident_wrong_class_is_excluded(bag_factory):
    table = InstanceTable.from_bags([bag_factory("b0", 0, [[1.0]]), bag_factory("b1", 1, [[1.0], [0.0]])])
    cands = extract_candidates(_confident_model(), table, 0.6)
    assert cands.keys() == [("b1", 0)]
    assert cands.confidence[0] > 0.99
    assert cands.feature_dim == 1


def test_threshold_one_keeps_nothing_on_unsaturated_model(small_dataset):
    table = InstanceTable.from_bags(small_dataset)
    model = MlpModel.build(table.feature_dim, 4, (8, 6), seed=0)
    assert len(extract_candidates(model, table, 1.0)) == 0


def test_candidates_are_grouped_by_class(small_split, fast_coteach):
    train, _ = small_split
    table = InstanceTable.from_bags(train)
    model = train_single(train, [], fast_coteach, 4)
    cands = extract_candidates(model, table, 0.3)
    assert np.all(np.diff(cands.labels) >= 0)
    assert np.all(cands.confidence >= 0.3)
    assert cands.has_inputs


@pytest.mark.parametrize("threshold", [0.0, 1.5])
def test_threshold_range(small_dataset, threshold):
    table = InstanceTable.from_bags(small_dataset)
    with pytest.raises(ArgumentError):
        extract_candidates(MlpModel.build(table.feature_dim, 4, seed=0), table, threshold)


@pytest.mark.slow
def test_exchanged_samples_are_cleaner_than_the_training_set():
    shares, baseline = [], []
    for seed in range(5):
        bags = generate(GenConfig(bags_per_class=(10, 10, 10, 10), instances_per_bag=(20, 30), seed=seed))
        train, val = split(bags, 0.8, seed=seed)
        config = CoteachConfig(epochs=12, batch_size=32, lr0=0.1, forget_rate=0.4, ramp_epochs=4,
                               warmup_epochs=2, hidden_dims=(16, 8), seed=seed)
        result = train_coteach(train, val, config, 4)
        is_noise = InstanceTable.from_bags(train).is_noise
        shares.append(is_noise[result.selected_rows_a].mean())
        baseline.append(is_noise.mean())
    assert np.median(shares) < np.median(baseline)
