"""Shared fixtures: small synthetic cohorts and fast training configs."""

import numpy as np
import pytest

from src.data.bags import Bag, Instance
from src.data.data_splitter import split
from src.data.resampler import ResampleConfig
from src.data.synthetic_generator import GenConfig, generate
from src.features.lof_denoiser import LofParams
from src.training.coteaching import CoteachConfig
from src.training.dpmil_pipeline import DpmilConfig
from src.training.mil_trainer import MilConfig


def make_bag(bag_id, label, rows, noise=None):
    """Bag from a list of feature rows."""
    rows = np.asarray(rows, dtype=np.float64)
    noise = noise if noise is not None else [False] * rows.shape[0]
    return Bag(bag_id, label, [Instance(bag_id, i, row, bool(noise[i])) for i, row in enumerate(rows)])


@pytest.fixture
def small_gen_config():
    return GenConfig(bags_per_class=(6, 6, 6, 6), instances_per_bag=(8, 12), feature_dim=8, seed=11)


@pytest.fixture
def small_dataset(small_gen_config):
    return generate(small_gen_config)


@pytest.fixture
def small_split(small_dataset):
    return split(small_dataset, 0.8, seed=3)


@pytest.fixture
def fast_coteach():
    return CoteachConfig(epochs=3, batch_size=16, lr0=0.1, forget_rate=0.2, ramp_epochs=2, warmup_epochs=0,
                         conf_threshold=0.3, hidden_dims=(8, 6), seed=5)


@pytest.fixture
def fast_dpmil(fast_coteach):
    return DpmilConfig(
        resample=ResampleConfig(seed=1),
        coteach=fast_coteach,
        lof=LofParams(k=3, theta=1.5, cap_per_class=200, seed=2),
        mil=MilConfig(alpha=0.5, epochs=2, batch_size=16, lr0=0.05, seed=4),
    )


@pytest.fixture
def bag_factory():
    return make_bag
