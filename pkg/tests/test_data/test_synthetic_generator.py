import numpy as np
import pytest

from src.data.bags import class_counts
from src.data.dataset_io import format_dataset
from src.data.synthetic_generator import GenConfig, clean_count, generate, nearest_centroid_accuracy
from src.utils.validators import ConfigError


def test_default_config_bag_counts():
    bags = generate(GenConfig())
    assert class_counts(bags, 4) == [25, 30, 25, 20]
    assert [b.bag_id for b in bags[:2]] == ["bag0000", "bag0001"]


def test_instances_per_bag_and_noise_share(small_gen_config):
    bags = generate(small_gen_config)
    lo, hi = small_gen_config.instances_per_bag
    for bag in bags:
        assert lo <= len(bag) <= hi
        assert int(np.sum(~bag.noise_flags())) == clean_count(len(bag), small_gen_config.noise_fraction)
        assert sorted(inst.index for inst in bag.instances) == list(range(len(bag)))
        assert bag.feature_dim == small_gen_config.feature_dim


def test_zero_noise_fraction_means_no_noise(small_gen_config):
    small_gen_config.noise_fraction = 0.0
    bags = generate(small_gen_config)
    assert not any(inst.is_noise for bag in bags for inst in bag.instances)


def test_same_seed_gives_identical_files(small_gen_config):
    assert format_dataset(generate(small_gen_config)) == format_dataset(generate(small_gen_config))


def test_different_seed_changes_features(small_gen_config):
    first = generate(small_gen_config)
    small_gen_config.seed += 1
    assert format_dataset(first) != format_dataset(generate(small_gen_config))


def test_clean_instances_are_separable():
    config = GenConfig(seed=4)
    assert nearest_centroid_accuracy(generate(config), config) >= 0.95


@pytest.mark.parametrize("n, fraction, expected", [(10, 0.4, 6), (7, 0.4, 5), (30, 0.0, 30), (1, 0.9, 1)])
def test_clean_count_rounds_up(n, fraction, expected):
    assert clean_count(n, fraction) == expected


@pytest.mark.parametrize("overrides", [
    {"bags_per_class": (0, 0, 0, 0)},
    {"instances_per_bag": (5, 2)},
    {"noise_fraction": 1.0},
    {"feature_dim": 0},
    {"resolution_tag": "40X"},
])
def test_degenerate_configs_rejected(overrides):
    with pytest.raises(ConfigError):
        generate(GenConfig(**overrides))


def test_background_does_not_depend_on_the_bag_label():
    bags = generate(GenConfig(bags_per_class=(40, 40, 40, 40), seed=6))
    noise = {label: [] for label in range(4)}
    for bag in bags:
        noise[bag.label].extend(inst.features for inst in bag.instances if inst.is_noise)
    for label in range(4):
        own = np.asarray(noise[label])
        rest = np.asarray([f for other in range(4) if other != label for f in noise[other]])
        stderr = np.sqrt(own.var(axis=0, ddof=1) / len(own) + rest.var(axis=0, ddof=1) / len(rest))
        assert np.all(np.abs(own.mean(axis=0) - rest.mean(axis=0)) < 4.5 * stderr)
