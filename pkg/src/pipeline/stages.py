"""
CLI stage functions.

Each stage reads its inputs from the run directory, writes its artifacts,
and records them in the manifest:

    gen       dataset.bags
    split     train.bags, val.bags
    coteach   coteach-a.mlp, coteach-b.mlp, coteach-chosen.txt,
              coteach-history.csv, coteach-selected.csv, candidates.txt
    denoise   discriminative.txt, denoise-report.csv
    finetune  finetune.mlp, finetune-history.csv, predictions-direct.csv
    fuse      binary-<code>.mlp, fusion.txt, predictions-fused.csv
    eval      metrics.csv
    ablate    ablation.csv
"""

from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import pandas as pd

from src.data.bags import InstanceTable
from src.data.data_splitter import split
from src.data.dataset_io import read_dataset, write_dataset
from src.data.synthetic_generator import generate
from src.evaluation.ablation import run_ablation, write_ablation
from src.evaluation.performance_metrics import compute_metrics, write_report
from src.evaluation.predictions import read_predictions, write_predictions
from src.features.candidates import read_candidates, write_candidates
from src.features.lof_denoiser import DenoiseReport, denoise, write_denoise_report
from src.fusion.binary_models import train_all_binaries
from src.fusion.weighted_fusion import WeightedFusion, write_fusion
from src.models.checkpoint import read_checkpoint, write_checkpoint
from src.training.coteaching import extract_candidates, train_coteach, train_single
from src.training.mil_trainer import (
    SlidePrediction,
    finetune_two_stage,
    group_patches,
    patch_metrics,
    predict_slides,
)
from src.pipeline.artifacts import ArtifactPaths, Manifest
from src.pipeline.run_config import RunConfig
from src.utils.constants import FLOAT_FORMAT
from src.utils.logger import get_logger, log_stage_result
from src.utils.validators import DataFormatError

logger = get_logger("cli")

STAGE_ORDER = ("gen", "split", "coteach", "denoise", "finetune", "fuse", "eval")


def _write_history(records: Sequence[dict], path: Path) -> Path:
    frame = pd.DataFrame(list(records))
    path.write_text(frame.to_csv(index=False, lineterminator="\n", float_format=FLOAT_FORMAT), encoding="utf-8")
    return path


def _finish(stage: str, paths: ArtifactPaths, written: List[Path]) -> List[Path]:
    manifest = Manifest(paths.manifest)
    for path in written:
        manifest.record(stage, path, paths.root)
    manifest.save()
    logger.info(f"Stage {stage} wrote {len(written)} file(s) to {paths.root}")
    return written


def run_gen(config: RunConfig, paths: ArtifactPaths, threads: Optional[int] = None) -> List[Path]:
    bags = generate(config.generator_config())
    paths.root.mkdir(parents=True, exist_ok=True)
    return _finish("gen", paths, [write_dataset(bags, paths.dataset)])


def run_split(config: RunConfig, paths: ArtifactPaths, threads: Optional[int] = None) -> List[Path]:
    bags = read_dataset(paths.require(paths.dataset, "gen"), config.n_classes)
    train, val = split(bags, config.split.ratio, config.split_seed())
    return _finish("split", paths, [write_dataset(train, paths.train), write_dataset(val, paths.val)])


def _read_chosen(paths: ArtifactPaths) -> str:
    text = paths.require(paths.coteach_chosen, "coteach").read_text(encoding="utf-8").strip()
    if text not in ("a", "b"):
        raise DataFormatError(f"expected 'a' or 'b', got {text!r}", line=1, path=paths.coteach_chosen)
    return text


def run_coteach(config: RunConfig, paths: ArtifactPaths, threads: Optional[int] = None) -> List[Path]:
    train = read_dataset(paths.require(paths.train, "split"), config.n_classes)
    val = read_dataset(paths.require(paths.val, "split"), config.n_classes)
    stage_cfg = config.stage_config()
    resample = stage_cfg.resample if stage_cfg.use_resample else None
    written: List[Path] = []

    if stage_cfg.use_coteach:
        result = train_coteach(train, val, stage_cfg.coteach, config.n_classes, resample, config.run.progress)
        written.append(write_checkpoint(result.model_a, paths.coteach_checkpoint("a")))
        written.append(write_checkpoint(result.model_b, paths.coteach_checkpoint("b")))
        chosen = result.chosen
        candidates = result.candidates
        history = result.history
        table = InstanceTable.from_bags(train)
        selected = [
            {"model": which, "row": int(r), "bag_id": table.bag_ids[r], "instance_index": int(table.instance_index[r])}
            for which, rows in (("a", result.selected_rows_a), ("b", result.selected_rows_b))
            for r in rows
        ]
        paths.coteach_selected.write_text(
            pd.DataFrame(selected, columns=["model", "row", "bag_id", "instance_index"]).to_csv(index=False, lineterminator="\n"),
            encoding="utf-8",
        )
        written.append(paths.coteach_selected)
    else:
        history = []
        model = train_single(train, val, stage_cfg.coteach, config.n_classes, resample=resample, history=history)
        written.append(write_checkpoint(model, paths.coteach_checkpoint("a")))
        chosen = "a"
        candidates = extract_candidates(model, InstanceTable.from_bags(train), stage_cfg.coteach.conf_threshold)

    paths.coteach_chosen.write_text(f"{chosen}\n", encoding="utf-8")
    written.append(paths.coteach_chosen)
    if history:
        written.append(_write_history(history, paths.coteach_history))
    written.append(write_candidates(candidates, paths.candidates))
    return _finish("coteach", paths, written)


def run_denoise(config: RunConfig, paths: ArtifactPaths, threads: Optional[int] = None) -> List[Path]:
    candidates = read_candidates(paths.require(paths.candidates, "coteach"))
    stage_cfg = config.stage_config()
    if stage_cfg.use_lof:
        kept, report = denoise(candidates, stage_cfg.lof, config.n_classes, threads)
    else:
        kept, report = candidates, DenoiseReport()
        logger.info("LOF disabled; candidates pass through unchanged")
    written = [write_candidates(kept, paths.discriminative)]
    if report.rows:
        written.append(write_denoise_report(report, paths.denoise_report))
    return _finish("denoise", paths, written)


def run_finetune(config: RunConfig, paths: ArtifactPaths, threads: Optional[int] = None) -> List[Path]:
    train = read_dataset(paths.require(paths.train, "split"), config.n_classes)
    val = read_dataset(paths.require(paths.val, "split"), config.n_classes)
    chosen = _read_chosen(paths)
    init = read_checkpoint(paths.require(paths.coteach_checkpoint(chosen), "coteach"))
    discriminative = read_candidates(paths.require(paths.discriminative, "denoise")).attach_inputs(train)

    history: List[dict] = []
    groups = group_patches(discriminative, train)
    mil = config.stage_config().mil
    model = finetune_two_stage(init, groups, val, mil, config.n_classes, history, config.run.progress)

    written = [write_checkpoint(model, paths.finetune_checkpoint)]
    if history:
        written.append(_write_history(history, paths.finetune_history))
    if val:
        written.append(write_predictions(predict_slides(model, val), paths.direct_predictions))
    return _finish("finetune", paths, written)


def run_fuse(config: RunConfig, paths: ArtifactPaths, threads: Optional[int] = None) -> List[Path]:
    train = read_dataset(paths.require(paths.train, "split"), config.n_classes)
    val = read_dataset(paths.require(paths.val, "split"), config.n_classes)
    binaries = train_all_binaries(
        train, val, config.stage_config(), config.run.seed, config.n_classes, config.fusion.binary_alpha, threads
    )
    written = [write_checkpoint(b.model, paths.binary_checkpoint(b.target)) for b in binaries]

    fusion = WeightedFusion(binaries)
    weights = fusion.optimise_weights(val, config.fusion)
    written.append(write_fusion(weights, paths.fusion))

    if val:
        confidences = fusion.confidences(val)
        predicted = fusion.predict(val)
        fused = [
            SlidePrediction(bag.bag_id, confidences[i], true_class=bag.label, predicted=predicted[i])
            for i, bag in enumerate(val)
        ]
        written.append(write_predictions(fused, paths.fused_predictions))
    return _finish("fuse", paths, written)


def evaluate_predictions(config: RunConfig, predictions_path: Path, stage: str, report_path: Path) -> Path:
    """Score one predictions file into the metrics report under the given stage tag."""
    predictions = read_predictions(predictions_path)
    scored = [p for p in predictions if p.true_class is not None]
    n_classes = max([config.n_classes] + [p.n_classes for p in scored])
    report = compute_metrics([p.predicted_class for p in scored], [p.true_class for p in scored], n_classes, stage)
    log_stage_result("eval", f"{stage} macro F1", report.f1_macro, extra=f"accuracy {report.accuracy:.4f}")
    return write_report(report, report_path)


def run_eval(
    config: RunConfig,
    paths: ArtifactPaths,
    threads: Optional[int] = None,
    predictions: Optional[Path] = None,
) -> List[Path]:
    if predictions is not None:
        path = evaluate_predictions(config, Path(predictions), config.tag(Path(predictions).stem), paths.metrics)
        return _finish("eval", paths, [path])

    sources = [(paths.direct_predictions, "direct"), (paths.fused_predictions, "fusion")]
    available = [(p, name) for p, name in sources if p.exists()]
    if not available:
        paths.require(paths.direct_predictions, "finetune")
    for path, name in available:
        evaluate_predictions(config, path, config.tag(name), paths.metrics)

    if paths.finetune_checkpoint.exists() and paths.val.exists():
        model = read_checkpoint(paths.finetune_checkpoint)
        val = read_dataset(paths.val, config.n_classes)
        report = patch_metrics(model, val, config.n_classes, config.tag("direct-patch"))
        write_report(report, paths.metrics)
    return _finish("eval", paths, [paths.metrics])


def run_ablation_stage(config: RunConfig, paths: ArtifactPaths, threads: Optional[int] = None) -> List[Path]:
    train = read_dataset(paths.require(paths.train, "split"), config.n_classes)
    val = read_dataset(paths.require(paths.val, "split"), config.n_classes)
    rows = run_ablation(
        train, val, config.stage_config(), config.fusion, config.n_classes, config.run.seed, threads=threads
    )
    return _finish("ablate", paths, [write_ablation(rows, paths.ablation)])


STAGES: Dict[str, Callable[..., List[Path]]] = {
    "gen": run_gen,
    "split": run_split,
    "coteach": run_coteach,
    "denoise": run_denoise,
    "finetune": run_finetune,
    "fuse": run_fuse,
    "eval": run_eval,
}


def run_pipeline(
    config: RunConfig, paths: ArtifactPaths, threads: Optional[int] = None, ablate: bool = False
) -> List[Path]:
    """Every stage in order, then the ablation table when requested."""
    written: List[Path] = []
    for name in STAGE_ORDER:
        logger.info(f"Running stage {name}")
        written.extend(STAGES[name](config, paths, threads))
    if ablate:
        written.extend(run_ablation_stage(config, paths, threads))
    return written
