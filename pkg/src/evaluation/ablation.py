"""
Ablation harness.

Trains every comparison arm on one train / validation split and scores
each at slide level on the validation bags:

    resample  no-resample | resample          plain single model
    coteach   no-coteach | coteach            plain (balanced) vs chosen peer
    lof       no-lof | lof                    fine-tuned on raw vs denoised candidates
    alpha     alpha-<a> for every sweep value fine-tuned on denoised candidates
    fusion    direct | fusion-uniform | fusion-weighted

Shared intermediate results (co-teaching, candidates, LOF) are computed once.

Table file ("ablation v1"):
    line 1: ablation v1
    line 2: group,arm,accuracy,precision_macro,recall_macro,f1_macro,n_bags
"""

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from src.data.bags import Bag
from src.evaluation.performance_metrics import MetricsReport, compute_metrics
from src.features.lof_denoiser import denoise
from src.fusion.binary_models import train_all_binaries
from src.fusion.weighted_fusion import FusionConfig, WeightedFusion
from src.models.mlp import MlpModel
from src.training.coteaching import train_coteach, train_single
from src.training.dpmil_pipeline import DpmilConfig
from src.training.mil_trainer import finetune_two_stage, group_patches, slide_metrics
from src.utils.constants import ABLATION_MAGIC, ALPHA_SWEEP, FLOAT_FORMAT, NUM_SUBTYPES
from src.utils.logger import get_logger, log_stage_result
from src.utils.validators import ArgumentError, DataError, DataFormatError

logger = get_logger("ablation")

ABLATION_COLUMNS = ["group", "arm", "accuracy", "precision_macro", "recall_macro", "f1_macro", "n_bags"]


@dataclass
class AblationRow:
    group: str
    arm: str
    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    n_bags: int

    @classmethod
    def from_report(cls, group: str, arm: str, report: MetricsReport) -> "AblationRow":
        return cls(group, arm, report.accuracy, report.precision_macro, report.recall_macro,
                   report.f1_macro, report.n_samples)


def alpha_arm(alpha: float) -> str:
    return f"alpha-{alpha:g}"


def run_ablation(
    train_bags: Sequence[Bag],
    val_bags: Sequence[Bag],
    config: DpmilConfig,
    fusion_config: Optional[FusionConfig] = None,
    n_classes: int = NUM_SUBTYPES,
    seed: int = 0,
    alphas: Sequence[float] = ALPHA_SWEEP,
    include_fusion: bool = True,
    threads: Optional[int] = None,
) -> List[AblationRow]:
    """
    Train and score every ablation arm.

    Returns:
        One row per arm, in the order listed in the module docstring

    Raises:
        ArgumentError: No validation bags to score on
    """
    if not val_bags:
        raise ArgumentError("ablation needs validation bags")
    config.validate()
    rows: List[AblationRow] = []

    def score(group: str, arm: str, model: MlpModel, classes: int = n_classes) -> None:
        report = slide_metrics(model, val_bags, classes, stage=arm)
        rows.append(AblationRow.from_report(group, arm, report))
        log_stage_result("ablation", f"{arm} F1", report.f1_macro, extra=f"acc {report.accuracy:.3f}")

    plain = train_single(train_bags, val_bags, config.coteach, n_classes, resample=None)
    balanced = train_single(train_bags, val_bags, config.coteach, n_classes, resample=config.resample)
    score("resample", "no-resample", plain)
    score("resample", "resample", balanced)

    coteach = train_coteach(train_bags, val_bags, config.coteach, n_classes, config.resample)
    score("coteach", "no-coteach", balanced)
    score("coteach", "coteach", coteach.chosen_model)

    candidates = coteach.candidates
    discriminative, _ = denoise(candidates, config.lof, n_classes, threads)
    raw_groups = group_patches(candidates, train_bags)
    lof_groups = group_patches(discriminative, train_bags)
    init = coteach.chosen_model

    no_lof = finetune_two_stage(init, raw_groups, [], config.mil, n_classes)
    with_lof = finetune_two_stage(init, lof_groups, [], config.mil, n_classes)
    score("lof", "no-lof", no_lof)
    score("lof", "lof", with_lof)

    for alpha in alphas:
        cfg = config.with_alpha(alpha).mil
        score("alpha", alpha_arm(alpha), finetune_two_stage(init, lof_groups, [], cfg, n_classes))

    if include_fusion:
        fusion_config = (fusion_config or FusionConfig()).validate()
        score("fusion", "direct", with_lof)
        binaries = train_all_binaries(
            train_bags, val_bags, config, seed, n_classes, fusion_config.binary_alpha, threads
        )
        fusion = WeightedFusion(binaries)
        truths = [bag.label for bag in val_bags]
        uniform = compute_metrics(fusion.predict(val_bags), truths, n_classes, "fusion-uniform")
        rows.append(AblationRow.from_report("fusion", "fusion-uniform", uniform))
        fusion.optimise_weights(val_bags, fusion_config)
        weighted = compute_metrics(fusion.predict(val_bags), truths, n_classes, "fusion-weighted")
        rows.append(AblationRow.from_report("fusion", "fusion-weighted", weighted))
        logger.info(f"Fusion F1 uniform {uniform.f1_macro:.4f}, weighted {weighted.f1_macro:.4f}")

    return rows


def ablation_frame(rows: Sequence[AblationRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in rows], columns=ABLATION_COLUMNS)


def write_ablation(rows: Sequence[AblationRow], path: Union[str, Path]) -> Path:
    if not rows:
        raise DataError("no ablation rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = ablation_frame(rows).to_csv(index=False, lineterminator="\n", float_format=FLOAT_FORMAT)
    path.write_text(f"{ABLATION_MAGIC}\n{body}", encoding="utf-8")
    return path


def read_ablation(path: Union[str, Path]) -> List[AblationRow]:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    if first != ABLATION_MAGIC:
        raise DataFormatError(f"expected '{ABLATION_MAGIC}', got {first!r}", line=1, path=path)
    frame = pd.read_csv(path, skiprows=1, float_precision="round_trip")
    if list(frame.columns) != ABLATION_COLUMNS:
        raise DataFormatError(f"expected columns {ABLATION_COLUMNS}", line=2, path=path)
    return [
        AblationRow(str(r["group"]), str(r["arm"]), float(r["accuracy"]), float(r["precision_macro"]),
                    float(r["recall_macro"]), float(r["f1_macro"]), int(r["n_bags"]))
        for r in frame.to_dict(orient="records")
    ]
