"""
In-memory DPMIL pipeline: resample -> co-teach -> candidates -> LOF -> fine-tune.

Used directly by the binary one-vs-rest models and the ablation harness; the
CLI stages run the same steps one at a time through files. Every step can be
switched off to produce the comparison arms:
    use_resample  False trains on the raw (imbalanced) instance table
    use_coteach   False trains one plain model instead of two peers
    use_lof       False fine-tunes on the confidence-selected candidates as-is
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

from src.data.bags import Bag, InstanceTable
from src.data.resampler import ResampleConfig
from src.features.candidates import CandidateSet
from src.features.lof_denoiser import DenoiseReport, LofParams, denoise
from src.models.mlp import MlpModel
from src.training.coteaching import CoteachConfig, CoteachResult, extract_candidates, train_coteach, train_single
from src.training.mil_trainer import MilConfig, finetune_two_stage, group_patches
from src.utils.constants import NUM_SUBTYPES
from src.utils.helpers import derive_seed
from src.utils.logger import get_logger

logger = get_logger("pipeline")


@dataclass
class DpmilConfig:
    resample: ResampleConfig = field(default_factory=ResampleConfig)
    coteach: CoteachConfig = field(default_factory=CoteachConfig)
    lof: LofParams = field(default_factory=LofParams)
    mil: MilConfig = field(default_factory=MilConfig)
    use_resample: bool = True
    use_coteach: bool = True
    use_lof: bool = True

    def validate(self) -> "DpmilConfig":
        self.resample.validate()
        self.coteach.validate()
        self.lof.validate()
        self.mil.validate()
        return self

    def reseeded(self, seed: int, *names) -> "DpmilConfig":
        """Copy with every stage seed derived from (seed, *names, stage)."""
        return replace(
            self,
            resample=replace(self.resample, seed=derive_seed(seed, *names, "resample")),
            coteach=replace(self.coteach, seed=derive_seed(seed, *names, "coteach"), model_seeds=None),
            lof=replace(self.lof, seed=derive_seed(seed, *names, "lof")),
            mil=replace(self.mil, seed=derive_seed(seed, *names, "mil")),
        )

    def with_alpha(self, alpha: float) -> "DpmilConfig":
        return replace(self, mil=replace(self.mil, alpha=alpha))


@dataclass
class DpmilResult:
    initial_model: MlpModel
    model: MlpModel
    candidates: CandidateSet
    discriminative: CandidateSet
    coteach: Optional[CoteachResult] = None
    denoise_report: Optional[DenoiseReport] = None
    finetune_history: List[dict] = field(default_factory=list)


def run_dpmil(
    train_bags: Sequence[Bag],
    val_bags: Sequence[Bag],
    config: DpmilConfig,
    n_classes: int = NUM_SUBTYPES,
    threads: Optional[int] = None,
    progress: bool = False,
) -> DpmilResult:
    """
    Run the whole training pipeline on bags held in memory.

    Returns:
        DpmilResult with the pre-fine-tuning model, the final model and the
        intermediate candidate sets
    """
    config.validate()
    resample = config.resample if config.use_resample else None

    coteach_result = None
    if config.use_coteach:
        coteach_result = train_coteach(train_bags, val_bags, config.coteach, n_classes, resample, progress)
        initial = coteach_result.chosen_model
        candidates = coteach_result.candidates
    else:
        initial = train_single(train_bags, val_bags, config.coteach, n_classes, resample=resample)
        candidates = extract_candidates(initial, InstanceTable.from_bags(train_bags), config.coteach.conf_threshold)

    report = None
    discriminative = candidates
    if config.use_lof:
        discriminative, report = denoise(candidates, config.lof, n_classes, threads)

    history: List[dict] = []
    groups = group_patches(discriminative, train_bags)
    model = finetune_two_stage(initial, groups, val_bags, config.mil, n_classes, history, progress)
    logger.info(
        f"DPMIL run done: {len(candidates)} candidates, {len(discriminative)} discriminative, "
        f"alpha {config.mil.alpha}"
    )
    return DpmilResult(
        initial_model=initial,
        model=model,
        candidates=candidates,
        discriminative=discriminative,
        coteach=coteach_result,
        denoise_report=report,
        finetune_history=history,
    )
