"""
Features Package

Discriminative-patch features: confidence-selected candidates and their
LOF-based denoising.

Architecture:
    candidates.py    → CandidateSet + "candidates v1" reader / writer
    lof.py           → exact Local Outlier Factor scores
    lof_denoiser.py  → per-class filtering, DenoiseReport
"""

from .candidates import CandidateSet, read_candidates, write_candidates
from .lof import lof_scores
from .lof_denoiser import DenoiseReport, DenoiseRow, LofParams, denoise, filter_class

__all__ = [
    'CandidateSet',
    'DenoiseReport',
    'DenoiseRow',
    'LofParams',
    'denoise',
    'filter_class',
    'lof_scores',
    'read_candidates',
    'write_candidates',
]
