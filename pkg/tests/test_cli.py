from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from src.calibnet.config import ModelConfig
from src.calibnet.model import build_model
from src.cascade.cascade import CascadeModel
from src.cascade.run_io import load_run, save_run
from src.cascade.stages import OracleStage
from src.dataset.storage import load_split
from src.geometry.text_format import format_extrinsic
from src.main import cmd_calibrate, run

TINY = {
    "seed": 3,
    "dataset": {
        "counts": {"train": 8, "val": 4, "test": 6},
        "image_size": [32, 20],
        "min_correspondences": 5,
        "max_skip_rate": 0.9,
    },
    "model": {
        "image_size": [32, 20],
        "backbone_channels": [4, 8],
        "mlpconv_layers": 1,
        "mlpconv_maps": 4,
        "mlpconv_kernel": 3,
        "embed_dim": 8,
        "head": [16, 4],
    },
    "train": {"batch_size": 4, "max_epochs": 2},
    "evaluation": {"n_decals": 2, "windows": [1, 2], "overlay_count": 2},
}


def write_config(path: Path, **overrides) -> Path:
    data = {**TINY, **overrides}
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


@pytest.fixture
def config_file(tmp_path) -> Path:
    return write_config(tmp_path / "config.yaml")


@pytest.fixture
def tiny_run(tmp_path) -> Path:
    config = ModelConfig.model_validate(TINY["model"])
    cascade = CascadeModel(
        build_model(config, np.random.default_rng(0)),
        build_model(config, np.random.default_rng(1)),
        model_config=config,
    )
    out = tmp_path / "run"
    save_run(out, cascade, "primary")
    return out


def test_simulate_zero_frames(tmp_path, config_file):
    out = tmp_path / "frames"
    args = ["simulate", "--config", str(config_file), "--out", str(out)]
    assert run([*args, "--n-frames", "0", "--threads", "1"]) == 0
    assert (out / "rig.txt").exists()
    assert (out / "config.yaml").exists()
    assert (out / "detections.jsonl").read_text() == ""


def test_simulate_is_deterministic(tmp_path, config_file):
    for name in ("a", "b"):
        argv = [
            "simulate",
            "--config",
            str(config_file),
            "--out",
            str(tmp_path / name),
            "--n-frames",
            "2",
            "--threads",
            "2",
        ]
        assert run(argv) == 0
    for name in ("detections.jsonl", "scenes.jsonl", "images/000001.ppm"):
        first = (tmp_path / "a" / name).read_bytes()
        assert first == (tmp_path / "b" / name).read_bytes()


def test_invalid_config_exits_with_config_code(tmp_path, log_messages):
    config = write_config(
        tmp_path / "bad.yaml", scene={"lane_count": 0}
    )
    argv = ["simulate", "--config", str(config), "--out", str(tmp_path)]
    assert run([*argv, "--n-frames", "1"]) == 2
    assert any("scene.lane_count" in m for m in log_messages)


def test_negative_frame_count_is_rejected(tmp_path, config_file):
    argv = ["simulate", "--config", str(config_file), "--out", str(tmp_path)]
    assert run([*argv, "--n-frames", "-1"]) == 2


def test_lint_dataset(tiny_dataset, tmp_path, capsys):
    assert run(["lint-dataset", str(tiny_dataset)]) == 0
    assert "is valid" in capsys.readouterr().out
    assert run(["lint-dataset", str(tmp_path / "missing")]) == 4


def test_evaluate_random_with_stub(tmp_path, config_file, tiny_dataset):
    out = tmp_path / "report"
    argv = [
        "evaluate",
        "--config",
        str(config_file),
        "--dataset",
        str(tiny_dataset),
        "--stub",
        "identity",
        "--out",
        str(out),
        "--threads",
        "1",
    ]
    assert run(argv) == 0
    errors = pd.read_csv(out / "errors.csv")
    assert len(errors) == 3 * 6
    assert len(list((out / "overlays").glob("*.ppm"))) == 2 * 3
    table = pd.read_csv(out / "table.csv", index_col="stage")
    assert table.loc["Initial", "Total"] == pytest.approx(
        table.loc["Fine", "Total"]
    )


def test_evaluate_static_and_temporal(tmp_path, config_file, tiny_dataset):
    common = [
        "evaluate",
        "--config",
        str(config_file),
        "--dataset",
        str(tiny_dataset),
        "--stub",
        "oracle",
        "--threads",
        "1",
    ]
    static = tmp_path / "static"
    assert run([*common, "--protocol", "static", "--out", str(static)]) == 0
    frame = pd.read_csv(static / "static.csv")
    assert list(frame["decal"]) == [0, 1]
    np.testing.assert_allclose(frame["fine_total"].dropna(), 0.0, atol=1e-6)
    assert len(list(static.glob("static_means_*.svg"))) == 4
    per_sample = list(static.glob("static_decal*_*.svg"))
    assert len(per_sample) == (4 if (frame["frames"] > 0).any() else 0)

    temporal = tmp_path / "temporal"
    argv = [*common, "--protocol", "temporal", "--out", str(temporal)]
    assert run([*argv, "--window", "1", "--window", "2"]) == 0
    frame = pd.read_csv(temporal / "temporal.csv")
    assert list(frame["window"]) == [1, 2]


def test_evaluate_rejects_a_zero_window(
    tmp_path, config_file, tiny_dataset, log_messages
):
    argv = [
        "evaluate",
        "--config",
        str(config_file),
        "--dataset",
        str(tiny_dataset),
        "--stub",
        "oracle",
        "--protocol",
        "temporal",
        "--window",
        "0",
        "--out",
        str(tmp_path / "temporal"),
    ]
    assert run(argv) == 2
    assert any("evaluation.windows" in m for m in log_messages)
    assert not (tmp_path / "temporal" / "temporal.csv").exists()


def test_evaluate_generalization(tmp_path, config_file, tiny_dataset):
    out = tmp_path / "gen"
    argv = [
        "evaluate",
        "--config",
        str(config_file),
        "--dataset",
        str(tiny_dataset),
        "--secondary-dataset",
        str(tiny_dataset),
        "--stub",
        "identity",
        "--protocol",
        "generalization",
        "--out",
        str(out),
    ]
    assert run(argv) == 0
    degradation = pd.read_csv(out / "secondary" / "degradation.csv")
    np.testing.assert_allclose(degradation["Total"], 0.0)
    assert (out / "primary" / "errors.csv").exists()
    without_secondary = argv[:5] + argv[7:]
    assert run(without_secondary) == 2


def test_evaluate_argument_errors(tmp_path, config_file, tiny_dataset):
    base = [
        "evaluate",
        "--config",
        str(config_file),
        "--dataset",
        str(tiny_dataset),
        "--out",
        str(tmp_path / "out"),
    ]
    assert run(base) == 2
    assert run([*base, "--run", str(tmp_path / "no-run")]) == 4
    assert run([*base, "--stub", "oracle", "--threads", "0"]) == 2


def test_calibrate_prints_the_estimate(
    tmp_path, config_file, tiny_dataset, tiny_run, capsys
):
    out = tmp_path / "calibrated"
    argv = [
        "calibrate",
        "--config",
        str(config_file),
        "--run",
        str(tiny_run),
        "--dataset",
        str(tiny_dataset),
        "--index",
        "1",
        "--out",
        str(out),
    ]
    assert run(argv) == 0
    printed = capsys.readouterr().out
    assert "H_est = " in printed
    assert "q_coarse = " in printed
    assert "q_fine = " in printed
    stem = load_split(tiny_dataset, "test")[1].frame_id.replace("/", "_")
    assert (out / f"{stem}_overlay.ppm").exists()
    assert run([*argv[:-4], "--index", "99", "--out", str(out)]) == 2


def test_calibrate_with_a_replaced_initial_extrinsic(tmp_path, tiny_dataset):
    sample = load_split(tiny_dataset, "test")[0]
    h_init = tmp_path / "h_init.txt"
    h_init.write_text(format_extrinsic("H_init", sample.h_gt) + "\n")
    record = cmd_calibrate(
        CascadeModel(OracleStage(), OracleStage()),
        tiny_dataset,
        "test",
        0,
        tmp_path,
        h_init,
    )
    assert record.initial.total == pytest.approx(0.0, abs=1e-6)
    assert record.fine.total == pytest.approx(0.0, abs=1e-6)


@pytest.mark.slow
def test_full_pipeline(tmp_path, config_file):
    dataset, trained = tmp_path / "dataset", tmp_path / "run"
    common = ["--config", str(config_file), "--threads", "2"]
    assert run(["gen-dataset", *common, "--out", str(dataset)]) == 0
    assert run(["lint-dataset", str(dataset)]) == 0
    argv = ["train", *common, "--dataset", str(dataset), "--out", str(trained)]
    assert run([*argv, "--max-epochs", "2"]) == 0
    cascade, record = load_run(trained)
    assert record.rig_id == "primary"
    assert len(record.best_epochs) == 2
    assert cascade.model_config.image_size == (32, 20)
    report = tmp_path / "report"
    argv = ["evaluate", *common, "--dataset", str(dataset)]
    assert run([*argv, "--run", str(trained), "--out", str(report)]) == 0
    assert (report / "errors.csv").exists()


@pytest.mark.slow
def test_trained_cascade_reproduces_the_error_trends(tmp_path):
    config = write_config(
        tmp_path / "config.yaml",
        dataset={"counts": {"train": 5000, "val": 500, "test": 500}},
        model={},
        train={},
        evaluation={"n_decals": 20, "windows": [1, 5, 25]},
    )
    dataset, trained = tmp_path / "dataset", tmp_path / "run"
    common = ["--config", str(config)]
    assert run(["gen-dataset", *common, "--out", str(dataset)]) == 0
    argv = ["train", *common, "--dataset", str(dataset), "--out", str(trained)]
    assert run(argv) == 0
    evaluate = [
        "evaluate",
        *common,
        "--dataset",
        str(dataset),
        "--run",
        str(trained),
    ]

    random = tmp_path / "random"
    assert run([*evaluate, "--out", str(random)]) == 0
    table = pd.read_csv(random / "table.csv", index_col="stage")
    total = table["Total"]
    assert total["Fine"] < total["Coarse"] < total["Initial"]
    reduction = pd.read_csv(random / "reduction.csv", index_col="stage")
    assert reduction.loc["Coarse", "Total"] >= 50.0

    static = tmp_path / "static"
    assert run([*evaluate, "--protocol", "static", "--out", str(static)]) == 0
    means = pd.read_csv(static / "static.csv")["fine_total"].dropna()
    errors = pd.read_csv(static / "errors.csv")
    per_sample = errors.loc[errors["stage"] == "fine", "total_err"]
    assert means.std(ddof=0) <= per_sample.std(ddof=0)

    temporal = tmp_path / "temporal"
    argv = [*evaluate, "--protocol", "temporal", "--out", str(temporal)]
    assert run(argv) == 0
    windows = pd.read_csv(temporal / "temporal.csv", index_col="window")
    assert windows.loc[25, "total"] <= windows.loc[1, "total"]
