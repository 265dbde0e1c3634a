import numpy as np
import pytest

from src.evaluation.performance_metrics import read_report
from src.evaluation.predictions import write_predictions
from src.main import main
from src.pipeline.artifacts import ArtifactPaths, Manifest
from src.pipeline.stages import STAGE_ORDER, STAGES
from src.training.mil_trainer import SlidePrediction
from src.utils.validators import DataFormatError

SMALL_CONFIG = """\
run:
  seed: 4
generator:
  bags_per_class: [5, 5, 5, 5]
  instances_per_bag: [8, 12]
  feature_dim: 8
coteach:
  epochs: 2
  batch_size: 16
  lr0: 0.1
  conf_threshold: 0.3
lof:
  k: 3
  cap_per_class: 100
mil:
  epochs: 1
  batch_size: 16
  lr0: 0.05
fusion:
  grid_step: 0.5
model:
  hidden_dims: [8, 6]
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL_CONFIG)
    return path


def test_every_stage_has_a_command():
    assert list(STAGES) == list(STAGE_ORDER)


@pytest.mark.parametrize("stage, producer", [("split", "gen"), ("coteach", "split"), ("finetune", "split"),
                                             ("denoise", "coteach"), ("fuse", "split")])
def test_stage_before_its_inputs_exits_2(tmp_path, capsys, stage, producer):
    code = main([stage, "--out", str(tmp_path / "run")])
    assert code == 2
    assert f"run the '{producer}' stage first" in capsys.readouterr().err


def test_bad_config_exits_1(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("coteach:\n  epochs: 2\n  learning_rate: 0.1\n")
    assert main(["gen", "--config", str(path), "--out", str(tmp_path / "run")]) == 1
    assert "line 3" in capsys.readouterr().err


def test_unknown_command_exits_1():
    assert main(["train"]) == 1


def test_gen_then_split(tmp_path, small_config):
    out = tmp_path / "run"
    assert main(["gen", "--config", str(small_config), "--out", str(out)]) == 0
    assert main(["split", "--config", str(small_config), "--out", str(out)]) == 0
    manifest = Manifest(out / "manifest.csv")
    assert list(manifest.entries) == [("gen", "dataset.bags"), ("split", "train.bags"), ("split", "val.bags")]


def test_eval_scores_an_external_predictions_file(tmp_path):
    oracle = [SlidePrediction(f"b{i}", np.eye(4)[i % 4], true_class=i % 4) for i in range(8)]
    oracle.append(SlidePrediction("unlabelled", np.eye(4)[0]))
    source = write_predictions(oracle, tmp_path / "oracle.csv")
    out = tmp_path / "run"
    assert main(["eval", "--out", str(out), "--predictions", str(source)]) == 0
    (report,) = read_report(out / "metrics.csv")
    assert report.stage == "10X-oracle"
    assert report.f1_macro == 1.0
    assert report.n_samples == 8


def test_eval_without_predictions_exits_2(tmp_path):
    assert main(["eval", "--out", str(tmp_path / "run")]) == 2


def test_unknown_class_ordinal_exits_2(tmp_path, capsys):
    out = tmp_path / "run"
    out.mkdir()
    (out / "dataset.bags").write_text("bags v1 dim=1\nbag0,7,0,0,10X,1.0\n")
    assert main(["split", "--out", str(out)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_manifest_round_trip_and_replacement(tmp_path):
    paths = ArtifactPaths(tmp_path)
    first = tmp_path / "a.txt"
    first.write_text("alpha")
    manifest = Manifest(paths.manifest)
    manifest.record("gen", first, tmp_path)
    manifest.save()
    first.write_text("alpha, rewritten")
    again = Manifest(paths.manifest)
    again.record("gen", first, tmp_path)
    again.save()
    entries = Manifest(paths.manifest).entries
    assert list(entries) == [("gen", "a.txt")]
    assert entries[("gen", "a.txt")][1] == len("alpha, rewritten")


def test_manifest_magic_line(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_text("stage,file,sha256,bytes\n")
    with pytest.raises(DataFormatError):
        Manifest(path)


@pytest.mark.slow
def test_pipeline_is_reproducible(tmp_path, small_config):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["pipeline", "--config", str(small_config), "--out", str(out)]) == 0
        runs.append(Manifest(out / "manifest.csv").entries)
    assert runs[0] == runs[1]
    files = {name for _, name in runs[0]}
    assert {"dataset.bags", "candidates.txt", "discriminative.txt", "finetune.mlp", "fusion.txt",
            "predictions-direct.csv", "predictions-fused.csv", "metrics.csv"} <= files
    stages = [r.stage for r in read_report(tmp_path / "a" / "metrics.csv")]
    assert stages == ["10X-direct", "10X-fusion", "10X-direct-patch"]


@pytest.mark.slow
def test_seed_flag_changes_the_cohort(tmp_path, small_config):
    for seed in (1, 2):
        assert main(["gen", "--config", str(small_config), "--seed", str(seed), "--out", str(tmp_path / str(seed))]) == 0
    assert (tmp_path / "1" / "dataset.bags").read_bytes() != (tmp_path / "2" / "dataset.bags").read_bytes()
