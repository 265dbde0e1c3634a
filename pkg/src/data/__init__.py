"""
Data Package

Synthetic cohorts of bags, their file format, splitting and class balancing.

Architecture:
    bags.py                 → Instance, Bag, InstanceTable (flat column view)
    synthetic_generator.py  → GenConfig, generate()
    dataset_io.py           → "bags v1" reader / writer
    data_splitter.py        → stratified 8:2 split
    resampler.py            → per-epoch class balancing with augmentation
"""

from .bags import Bag, Dataset, Instance, InstanceTable, class_counts, relabel
from .synthetic_generator import GenConfig, generate
from .dataset_io import read_dataset, write_dataset
from .data_splitter import split, split_counts
from .resampler import ResampleConfig, augment, balance

__all__ = [
    'Bag',
    'Dataset',
    'GenConfig',
    'Instance',
    'InstanceTable',
    'ResampleConfig',
    'augment',
    'balance',
    'class_counts',
    'generate',
    'read_dataset',
    'relabel',
    'split',
    'split_counts',
    'write_dataset',
]
