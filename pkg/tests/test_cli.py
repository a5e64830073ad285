import json
import logging

import numpy as np
import pandas as pd
import pytest
import yaml

from spiking_seizure_prediction.cli import infer_windows, main, resolve_config
from spiking_seizure_prediction.conversion import load_model
from spiking_seizure_prediction.eeg_data import load_windows
from spiking_seizure_prediction.spike_encoder import EncoderConfig
from spiking_seizure_prediction.utils.errors import ConfigError

TINY_CONFIG = {
    "seed": 7,
    "encoder": {"time_steps": 4},
    "network": {"kernel_size": 3, "channels": [2], "fc_hidden": 4},
    "intervals": {"pil_s": 300.0, "sph_s": 30.0, "lead_gap_s": 300.0},
    "windows": {"window_s": 8.0, "preictal_stride_s": 6.0},
    "training": {"epochs": 2, "batch": 8},
    "calibration": {"max_samples": 8},
    "evaluation": {"time_step_sweep": [1, 2, 4]},
    "synth": {
        "recording_id": "tiny",
        "duration_s": 1200.0,
        "channels": 2,
        "sample_rate": 32,
        "band_hz": [0.5, 12.0],
        "seizures": [{"onset_s": 1100.0, "duration_s": 20.0}],
    },
}


@pytest.fixture
def config_file(tmp_path):
    file_path = tmp_path / "tiny.yaml"
    file_path.write_text(yaml.safe_dump(TINY_CONFIG))
    return file_path


def run_pipeline(root, config_file):
    """Run every stage from synthesis to complexity counts under ``root``."""
    config = ["--config", str(config_file)]
    steps = [
        ["synth", "--output-dir", f"{root}/data"],
        ["windows", "--edf", f"{root}/data/tiny.edf", "--annotations", f"{root}/data/tiny_annotations.csv"]
        + ["--output-dir", f"{root}/windows"],
        ["train", "--train", f"{root}/windows/train.eegw", "--test", f"{root}/windows/test.eegw"]
        + ["--output", f"{root}/cnn.scnw"],
        ["convert", "--weights", f"{root}/cnn.scnw", "--calibration-windows", f"{root}/windows/train.eegw"]
        + ["--output", f"{root}/snn.model"],
        ["infer", "--model", f"{root}/snn.model", "--windows", f"{root}/windows/test.eegw"]
        + ["--output", f"{root}/predictions.csv"],
        ["evaluate", "--predictions", f"{root}/predictions.csv", "--output-dir", f"{root}/evaluation"]
        + ["--model", f"{root}/snn.model", "--windows", f"{root}/windows/test.eegw"],
        ["opcount", "--spec", f"{root}/cnn.json", "--metrics", f"{root}/evaluation/metrics.csv"]
        + ["--output-dir", f"{root}/opcount"],
    ]
    for step in steps:
        assert main(step + config) == 0, step[0]


def test_pipeline_outputs(tmp_path, config_file):
    run_pipeline(tmp_path, config_file)

    windows = pd.read_csv(tmp_path / "windows" / "windows.csv")
    assert list(windows.columns) == ["split", "sample_id", "recording_id", "start_s", "label"]
    assert len(windows) == 49 + 96
    assert (windows["split"] == "train").sum() == 116
    train_matrices, _ = load_windows(tmp_path / "windows" / "train.eegw")
    assert train_matrices.shape[1:] == (1, 2, 256)

    predictions = pd.read_csv(tmp_path / "predictions.csv")
    assert list(predictions.columns) == ["sample_id", "label", "count_p", "count_i", "score", "prediction"]
    assert len(predictions) == 29
    assert predictions[["count_p", "count_i"]].to_numpy().max() <= 4

    model = load_model(tmp_path / "snn.model")
    assert model.calibration["method"] == "max_normalization"
    assert model.calibration["samples"] == 8

    metrics = pd.read_csv(tmp_path / "evaluation" / "metrics.csv")
    assert {"acc", "sen", "fpr", "auc", "fpr_per_hour"} <= set(metrics.columns)
    sweep = pd.read_csv(tmp_path / "evaluation" / "accuracy_by_time_step.csv")
    assert sweep["time_steps"].tolist() == [1, 2, 4]
    assert (tmp_path / "evaluation" / "roc.csv").is_file()
    assert len(pd.read_csv(tmp_path / "evaluation" / "threshold_sweep.csv")) == 5

    lines = (tmp_path / "opcount" / "opcount.txt").read_text().splitlines()
    assert "snn.muls=0" in lines and "cnn.mode=cnn" in lines
    report = json.loads((tmp_path / "opcount" / "opcount.json").read_text())
    assert report["snn"]["time_steps"] == 4
    comparison = pd.read_csv(tmp_path / "opcount" / "comparison.csv")
    assert comparison["name"].iloc[-1] == "this run"


def test_pipeline_is_reproducible(tmp_path, config_file):
    run_pipeline(tmp_path / "first", config_file)
    run_pipeline(tmp_path / "second", config_file)
    for name in ["data/tiny.edf", "windows/train.eegw", "cnn.scnw", "snn.model", "predictions.csv"]:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes(), name


def test_missing_model_is_a_data_error(tmp_path, config_file, caplog):
    with caplog.at_level(logging.ERROR):
        code = main(
            ["infer", "--model", str(tmp_path / "absent.model"), "--windows", str(tmp_path / "w.eegw")]
            + ["--output", str(tmp_path / "p.csv"), "--config", str(config_file)]
        )
    assert code == 2
    assert "Model file not found" in caplog.text


def test_usage_errors():
    assert main(["--help"]) == 0
    assert main(["train", "--bogus"]) == 1
    assert main([]) == 1


def test_invalid_configuration_exits_with_one(tmp_path):
    file_path = tmp_path / "bad.yaml"
    file_path.write_text(yaml.safe_dump({"encoder": {"time_steps": 0}}))
    assert main(["opcount", "--output-dir", str(tmp_path), "--config", str(file_path)]) == 1


def test_training_divergence_exits_with_three(tmp_path, config_file):
    run_pipeline_until_windows = [
        ["synth", "--output-dir", f"{tmp_path}/data"],
        ["windows", "--edf", f"{tmp_path}/data/tiny.edf", "--annotations", f"{tmp_path}/data/tiny_annotations.csv"]
        + ["--output-dir", f"{tmp_path}/windows"],
    ]
    for step in run_pipeline_until_windows:
        assert main(step + ["--config", str(config_file)]) == 0
    argv = ["train", "--train", f"{tmp_path}/windows/train.eegw", "--output", f"{tmp_path}/cnn.scnw"]
    assert main(argv + ["--lr", "1e300", "--config", str(config_file)]) == 3


def _printed_config(capsys, argv):
    assert main(argv + ["--print-config"]) == 0
    return yaml.safe_load(capsys.readouterr().out)


def test_seed_precedence(tmp_path, config_file, capsys, monkeypatch):
    argv = ["opcount", "--output-dir", str(tmp_path), "--config", str(config_file)]
    monkeypatch.delenv("SPIKING_SEIZURE_SEED", raising=False)
    assert _printed_config(capsys, argv)["seed"] == 7
    monkeypatch.setenv("SPIKING_SEIZURE_SEED", "99")
    assert _printed_config(capsys, argv)["seed"] == 99
    assert _printed_config(capsys, argv + ["--seed", "5"])["seed"] == 5
    monkeypatch.delenv("SPIKING_SEIZURE_SEED")
    assert _printed_config(capsys, ["opcount", "--output-dir", str(tmp_path)])["seed"] == 2022


def test_flags_override_the_file(tmp_path, config_file, capsys):
    argv = ["convert", "--weights", "w", "--output", "m", "--config", str(config_file)]
    printed = _printed_config(capsys, argv + ["--time-steps", "12", "--pool-mode", "rate_max", "--grid", "0.5", "1"])
    assert printed["encoder"]["time_steps"] == 12
    assert printed["neuron"]["pool_mode"] == "rate_max"
    assert printed["calibration"]["grid"] == [0.5, 1.0]
    assert printed["network"]["channels"] == [2]
    assert printed["synth"]["seizures"] == [{"onset_s": 1100.0, "duration_s": 20.0}]


def test_resolve_config_rejects_unknown_keys(config_file):
    with pytest.raises(ConfigError):
        resolve_config(config_file, {"encoder.bogus": 1})


@pytest.mark.slow
def test_parallel_inference_matches_serial(tmp_path, config_file):
    run_pipeline(tmp_path, config_file)
    model = load_model(tmp_path / "snn.model")
    matrices, _ = load_windows(tmp_path / "windows" / "test.eegw")
    encoder = EncoderConfig(time_steps=4, v_th_up=40.0, v_th_down=-40.0, seed=11)
    serial = infer_windows(model, matrices, encoder, batch=4, max_workers=1)
    parallel = infer_windows(model, matrices, encoder, batch=4, max_workers=2)
    assert serial == parallel
    assert len(serial) == len(matrices)
    assert np.isfinite([row[2] for row in serial]).all()


def test_resting_potential_is_not_configurable(tmp_path, config_file):
    argv = ["convert", "--weights", "w", "--output", "m", "--config", str(config_file), "--print-config"]
    assert main(argv + ["--v-rest", "0.5"]) == 1
    file_path = tmp_path / "resting.yaml"
    file_path.write_text(yaml.safe_dump({"neuron": {"v_rest": 0.5}}))
    assert main(["convert", "--weights", "w", "--output", "m", "--config", str(file_path)]) == 1


def test_evaluate_accepts_counts_from_a_longer_train(tmp_path, config_file):
    predictions = pd.DataFrame(
        [(0, 1, 15, 2, 0.9, 1), (1, 0, 3, 12, 0.2, 0), (2, 1, 9, 6, 0.6, 1), (3, 0, 0, 4, 0.1, 0)],
        columns=["sample_id", "label", "count_p", "count_i", "score", "prediction"],
    )
    predictions.to_csv(tmp_path / "predictions.csv", index=False)
    argv = ["evaluate", "--predictions", str(tmp_path / "predictions.csv"), "--output-dir", str(tmp_path / "out")]
    assert main(argv + ["--config", str(config_file)]) == 0
    metrics = pd.read_csv(tmp_path / "out" / "metrics.csv")
    assert metrics["time_steps"].iloc[0] == 15
    assert metrics["acc"].iloc[0] == 1.0
