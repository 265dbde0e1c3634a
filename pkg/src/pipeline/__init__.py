"""
Pipeline Package

Architecture:
    run_config.py  → RunConfig (all stage configs from one YAML file)
    artifacts.py   → run directory layout, manifest
    stages.py      → one function per CLI stage, run_pipeline()
"""

from .artifacts import ArtifactPaths, Manifest
from .run_config import RunConfig
from .stages import STAGE_ORDER, STAGES, run_pipeline

__all__ = [
    'ArtifactPaths',
    'Manifest',
    'RunConfig',
    'STAGES',
    'STAGE_ORDER',
    'run_pipeline',
]
