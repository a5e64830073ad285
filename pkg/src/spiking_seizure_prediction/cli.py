"""Command-line front end: synth, windows, train, convert, infer, evaluate, opcount and export-nwb.

Configuration is resolved as built-in YAML < ``--config`` file < ``SPIKING_SEIZURE_SEED``
(seed only) < command-line flags. Exit codes: 0 success, 1 usage or configuration error,
2 data or format error (including missing files), 3 numeric divergence.
"""
import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from tqdm import tqdm

from .cnn_reference import (
    TrainingConfig,
    default_network_spec,
    load_network_spec,
    load_weights,
    predict_logits,
    save_network_spec,
    save_weights,
    train_sgd,
)
from .complexity import CountMode, reference_comparison, static_op_counts
from .conversion import SnnModel, calibrate_thresholds, load_model, map_weights, save_model
from .eeg_data import (
    IntervalParams,
    SynthConfig,
    extract_windows,
    label_intervals,
    load_windows,
    read_annotations_csv,
    read_edf,
    save_windows,
    split_train_test,
    synth_generate,
    write_annotations_csv,
    write_edf,
)
from .evaluation import (
    accuracy_by_time_step,
    auc,
    confusion,
    fpr_per_hour,
    metrics,
    roc,
    threshold_sweep,
    write_metrics_csv,
    write_roc_csv,
    write_sweep_csv,
)
from .nwb_export import recording_to_nwb
from .snn_engine import IfConfig, PoolMode, ResetMode, SpikeCounts, decide, run_network_batch, score
from .spike_encoder import EncoderConfig, encode_batch, rate_transform
from .utils.errors import ConfigError, DivergenceError, InputError, SpikingSeizureError
from .utils.utils import Label, atomic_write, derive_seed, load_config, load_default_config, resolve_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3

PREDICTION_COLUMNS = ["sample_id", "label", "count_p", "count_i", "score", "prediction"]
WINDOW_INDEX_COLUMNS = ["split", "sample_id", "recording_id", "start_s", "label"]

# independent random streams derived from the global seed
SPLIT_STREAM = 1
TRAIN_STREAM = 2
CALIBRATION_STREAM = 3
INFERENCE_STREAM = 4
SYNTH_STREAM = 5


class EncoderSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    time_steps: int = Field(default=10, ge=1)
    v_th_up: float = 40.0
    v_th_down: float = -40.0
    sigma: Optional[float] = Field(default=None, gt=0.0)


class NeuronSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    v_th: float = Field(default=1.0, gt=0.0)
    leak: float = Field(default=0.0, ge=0.0)
    reset_mode: ResetMode = ResetMode.TO_REST
    pool_mode: PoolMode = PoolMode.OR


class NetworkSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kernel_size: int = Field(default=5, ge=1)
    channels: list[int] = Field(default_factory=lambda: [8, 8, 16, 16, 32])
    pool_window: int = Field(default=2, ge=1)
    stride: int = Field(default=1, ge=1)
    fc_hidden: int = Field(default=64, ge=1)
    n_classes: int = Field(default=2, ge=2)
    orientation: Literal["width", "height"] = "width"


class WindowSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    window_s: float = Field(default=20.0, gt=0.0)
    preictal_stride_s: float = Field(default=15.0, gt=0.0)
    interictal_stride_s: Optional[float] = Field(default=None, gt=0.0)
    train_ratio: tuple[int, int] = (4, 1)


class TrainingSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lr: float = Field(default=0.05, ge=0.0)
    epochs: int = Field(default=20, ge=1)
    batch: int = Field(default=32, ge=1)
    weight_scale: Optional[float] = Field(default=None, gt=0.0)
    train_bias: bool = True


class CalibrationSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    percentile: float = Field(default=100.0, gt=0.0, le=100.0)
    statistic: Literal["max", "mean"] = "max"
    max_samples: int = Field(default=64, ge=1)
    grid: list[float] = Field(default_factory=list)


class InferenceSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    count_threshold: int = Field(default=0, ge=0)
    max_workers: int = Field(default=1, ge=1)


class EvaluationSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    thresholds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    time_step_sweep: list[int] = Field(default_factory=lambda: [2, 5, 10, 20])


class ComplexitySection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    float_factor: float = Field(default=1.1, gt=0.0)
    t_ref: int = Field(default=10, ge=1)
    step_divisor: float = Field(default=10.0, gt=0.0)
    bit_width_factor: float = Field(default=32.0, gt=0.0)


class ReferenceWork(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    sen: Optional[float] = None
    auc: Optional[float] = None
    fpr: Optional[float] = None
    adds: float = Field(ge=0.0)
    muls: float = Field(ge=0.0)
    mem: float = Field(ge=0.0)


class RunConfig(BaseModel):
    """Resolved configuration of one command."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(ge=0, lt=2**64)
    encoder: EncoderSection = Field(default_factory=EncoderSection)
    neuron: NeuronSection = Field(default_factory=NeuronSection)
    network: NetworkSection = Field(default_factory=NetworkSection)
    intervals: IntervalParams = Field(default_factory=IntervalParams)
    windows: WindowSection = Field(default_factory=WindowSection)
    training: TrainingSection = Field(default_factory=TrainingSection)
    calibration: CalibrationSection = Field(default_factory=CalibrationSection)
    inference: InferenceSection = Field(default_factory=InferenceSection)
    evaluation: EvaluationSection = Field(default_factory=EvaluationSection)
    complexity: ComplexitySection = Field(default_factory=ComplexitySection)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    reference_works: list[ReferenceWork] = Field(default_factory=list)

    def encoder_config(self, stream: int) -> EncoderConfig:
        return EncoderConfig(**self.encoder.model_dump(), seed=derive_seed(self.seed, stream))

    def if_config(self) -> IfConfig:
        return IfConfig(**self.neuron.model_dump(exclude={"pool_mode"}))


def resolve_config(config_file_path: Optional[str | Path], overrides: dict) -> RunConfig:
    """Merge built-in defaults, a user file, the seed environment variable and dotted-key overrides."""
    config = load_config(config_file_path)
    config["seed"] = resolve_seed(config.get("seed"))
    for key, value in overrides.items():
        section = config
        *parents, leaf = key.split(".")
        for parent in parents:
            section = section.setdefault(parent, {})
        section[leaf] = value
    try:
        return RunConfig.model_validate(config)
    except ValidationError as exception:
        raise ConfigError(f"Invalid configuration:\n{exception}") from exception


def _require_file(file_path: Path, what: str) -> Path:
    if not Path(file_path).is_file():
        raise FileNotFoundError(f"{what} not found: {file_path}")
    return Path(file_path)


def _window_shape(config: RunConfig) -> tuple[int, int, int]:
    return (1, config.synth.channels, int(round(config.windows.window_s * config.synth.sample_rate)))


def _network_spec(config: RunConfig, input_shape: Sequence[int]):
    return default_network_spec(input_shape, **config.network.model_dump())


def cmd_synth(args: argparse.Namespace, config: RunConfig) -> list[Path]:
    """Write a synthetic EDF recording and its seizure annotations."""
    output_dir = Path(args.output_dir)
    recording, annotations = synth_generate(config.synth, derive_seed(config.seed, SYNTH_STREAM), config.intervals)
    edf_path = output_dir / f"{recording.recording_id}.edf"
    annotations_path = output_dir / f"{recording.recording_id}_annotations.csv"
    write_edf(recording, edf_path)
    write_annotations_csv(annotations, annotations_path)
    logger.info("Wrote %.0f s of %d-channel EEG to %s", recording.duration_s, recording.channels, edf_path)
    return [edf_path, annotations_path]


def cmd_windows(args: argparse.Namespace, config: RunConfig) -> list[Path]:
    """Label intervals, cut windows and write the stratified train/test split."""
    recording = read_edf(_require_file(args.edf, "EDF recording"))
    annotations = read_annotations_csv(_require_file(args.annotations, "Annotation file"))
    plan = label_intervals(annotations, recording.duration_s, config.intervals)
    samples = extract_windows(
        recording,
        plan,
        window_s=config.windows.window_s,
        preictal_stride_s=config.windows.preictal_stride_s,
        interictal_stride_s=config.windows.interictal_stride_s,
    )
    if not samples:
        raise InputError(f"No complete window fits the labelled intervals of {args.edf}")
    train, test = split_train_test(samples, config.windows.train_ratio, seed=derive_seed(config.seed, SPLIT_STREAM))

    output_dir = Path(args.output_dir)
    written = []
    rows = []
    for split, split_samples in (("train", train), ("test", test)):
        if not split_samples:
            logger.warning("The %s split is empty", split)
            continue
        path = output_dir / f"{split}.eegw"
        save_windows(split_samples, path)
        written.append(path)
        rows.extend(
            (split, index, sample.recording_id, sample.start_s, int(sample.label))
            for index, sample in enumerate(split_samples)
        )
    index_path = output_dir / "windows.csv"
    with atomic_write(index_path, mode="w") as f:
        pd.DataFrame(rows, columns=WINDOW_INDEX_COLUMNS).to_csv(f, index=False, lineterminator="\n")
    logger.info("%d training and %d test windows", len(train), len(test))
    return written + [index_path]


def _accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(logits.argmax(axis=1) == labels))


def cmd_train(args: argparse.Namespace, config: RunConfig) -> list[Path]:
    """Train the float CNN on rate-transformed windows and write its weights and topology."""
    matrices, labels = load_windows(_require_file(args.train, "Training windows"))
    encoder = config.encoder_config(INFERENCE_STREAM)
    inputs = rate_transform(matrices, encoder)
    spec = _network_spec(config, matrices.shape[1:])
    hyper = TrainingConfig(**config.training.model_dump(), seed=derive_seed(config.seed, TRAIN_STREAM))

    def report(epoch: int, loss: float):
        logger.info("epoch %d/%d loss %.6f", epoch, hyper.epochs, loss)

    weights = train_sgd(spec, inputs, labels, hyper, callback=report, verbose=args.verbose)
    logger.info("Training accuracy %.4f", _accuracy(predict_logits(spec, weights, inputs), labels))
    if args.test is not None:
        test_matrices, test_labels = load_windows(_require_file(args.test, "Test windows"))
        test_logits = predict_logits(spec, weights, rate_transform(test_matrices, encoder))
        logger.info("Test accuracy %.4f", _accuracy(test_logits, test_labels))

    weights_path = Path(args.output)
    spec_path = Path(args.spec_output) if args.spec_output is not None else weights_path.with_suffix(".json")
    save_weights(weights, weights_path)
    save_network_spec(spec, spec_path)
    return [weights_path, spec_path]


def cmd_convert(args: argparse.Namespace, config: RunConfig) -> list[Path]:
    """Map CNN weights onto the spiking network and calibrate its thresholds."""
    weights_path = _require_file(args.weights, "Weight file")
    spec_path = Path(args.spec) if args.spec is not None else weights_path.with_suffix(".json")
    spec = load_network_spec(_require_file(spec_path, "Network spec"))
    weights = load_weights(weights_path)
    model = map_weights(spec, weights, config.if_config(), pool_mode=config.neuron.pool_mode)

    calibration = config.calibration
    if calibration.enabled and args.calibration_windows is None:
        logger.warning("No calibration windows given; keeping v_th = %s on every layer", config.neuron.v_th)
    elif calibration.enabled:
        matrices, labels = load_windows(_require_file(args.calibration_windows, "Calibration windows"))
        matrices, labels = matrices[: calibration.max_samples], labels[: calibration.max_samples]
        trains = encode_batch(list(matrices), config.encoder_config(CALIBRATION_STREAM))
        model = calibrate_thresholds(
            model,
            trains,
            grid=calibration.grid,
            validation=(trains, labels) if calibration.grid else None,
            percentile=calibration.percentile,
            statistic=calibration.statistic,
            verbose=args.verbose,
        )
        logger.info("Calibrated thresholds: %s", ", ".join(f"{value:.6g}" for value in model.thresholds))
    output = Path(args.output)
    save_model(model, output)
    return [output]


def _infer_chunk(task: tuple) -> list[tuple[int, int, float, int]]:
    """Encode and run one chunk of windows whose first window has index ``start_index``."""
    model, encoder, matrices, start_index, count_threshold = task
    trains = encode_batch(list(matrices), encoder, start_index=start_index)
    run = run_network_batch(model.spec, model.weights, trains, model.if_cfgs, model.pool_mode)
    results = []
    for counts in run.spike_counts():
        results.append((counts.preictal, counts.interictal, score(counts), int(decide(counts, count_threshold))))
    return results


def infer_windows(
    model: SnnModel,
    matrices: np.ndarray,
    encoder: EncoderConfig,
    count_threshold: int = 0,
    batch: int = 32,
    max_workers: int = 1,
    verbose: bool = False,
) -> list[tuple[int, int, float, int]]:
    """(count_p, count_i, score, prediction) per window, in window order whatever the worker count."""
    tasks = [
        (model, encoder, matrices[start : start + batch], start, count_threshold)
        for start in range(0, len(matrices), batch)
    ]
    results = []
    if max_workers == 1:
        chunks = map(_infer_chunk, tasks)
        for chunk in tqdm(chunks, total=len(tasks), desc="Spiking inference", disable=not verbose):
            results.extend(chunk)
        return results
    with ProcessPoolExecutor(max_workers=max_workers) as executor:
        chunks = executor.map(_infer_chunk, tasks)
        for chunk in tqdm(chunks, total=len(tasks), desc="Spiking inference", disable=not verbose):
            results.extend(chunk)
    return results


def cmd_infer(args: argparse.Namespace, config: RunConfig) -> list[Path]:
    """Encode every window, run the spiking model and write one prediction row per window."""
    model = load_model(_require_file(args.model, "Model file"))
    matrices, labels = load_windows(_require_file(args.windows, "Windows"))
    results = infer_windows(
        model,
        matrices,
        config.encoder_config(INFERENCE_STREAM),
        count_threshold=config.inference.count_threshold,
        max_workers=config.inference.max_workers,
        verbose=args.verbose,
    )
    table = pd.DataFrame(
        [(index, int(label), *result) for index, (label, result) in enumerate(zip(labels, results))],
        columns=PREDICTION_COLUMNS,
    )
    output = Path(args.output)
    with atomic_write(output, mode="w") as f:
        table.to_csv(f, index=False, lineterminator="\n")
    logger.info("Wrote %d predictions to %s", len(table), output)
    return [output]


def read_predictions_csv(file_path: str | Path) -> pd.DataFrame:
    table = pd.read_csv(_require_file(Path(file_path), "Prediction file"))
    if list(table.columns) != PREDICTION_COLUMNS:
        raise InputError(f"Prediction header must be {','.join(PREDICTION_COLUMNS)}, got {','.join(table.columns)}")
    return table


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> list[Path]:
    """Metrics, ROC and count-threshold sweep of a prediction file."""
    table = read_predictions_csv(args.predictions)
    if table.empty:
        raise InputError(f"No predictions in {args.predictions}")
    labels = table["label"].to_numpy()
    # predictions may come from an infer run with a longer train than the current configuration
    time_steps = max(config.encoder.time_steps, int(table[["count_p", "count_i"]].to_numpy().max()))
    counts =[SpikeCounts(np.array([i, p]), time_steps) for p, i in zip(table["count_p"], table["count_i"])]

    result = metrics(confusion(table["prediction"].to_numpy(), labels))
    extra = {"time_steps": time_steps, "count_threshold": config.inference.count_threshold}
    n_interictal = int((labels == Label.INTERICTAL).sum())
    if n_interictal:
        false_alarms = int(((labels == Label.INTERICTAL) & (table["prediction"].to_numpy() == Label.PREICTAL)).sum())
        extra["fpr_per_hour"] = fpr_per_hour(false_alarms, n_interictal * config.windows.window_s)

    output_dir = Path(args.output_dir)
    written = [output_dir / "metrics.csv", output_dir / "threshold_sweep.csv"]
    auc_value = None
    if n_interictal and n_interictal < len(labels):
        curve = roc(table["score"].to_numpy(), labels)
        auc_value = auc(curve)
        write_roc_csv(curve, output_dir / "roc.csv")
        written.append(output_dir / "roc.csv")
    else:
        logger.warning("ROC needs both classes; skipping roc.csv")
    write_metrics_csv(result, written[0], auc_value=auc_value, extra=extra)
    write_sweep_csv(threshold_sweep(counts, labels, config.evaluation.thresholds), written[1])

    if args.model is not None or args.windows is not None:
        if args.model is None or args.windows is None:
            raise ConfigError("The time-step sweep needs both --model and --windows")
        model = load_model(_require_file(args.model, "Model file"))
        matrices, window_labels = load_windows(_require_file(args.windows, "Windows"))
        sweep = accuracy_by_time_step(
            model,
            matrices,
            window_labels,
            config.encoder_config(INFERENCE_STREAM),
            config.evaluation.time_step_sweep,
            count_threshold=config.inference.count_threshold,
        )
        sweep_path = output_dir / "accuracy_by_time_step.csv"
        with atomic_write(sweep_path, mode="w") as f:
            sweep.to_csv(f, index=False, lineterminator="\n")
        written.append(sweep_path)
    logger.info("acc %.4f sen %.4f fpr %.4f auc %s", result.acc, result.sen, result.fpr, auc_value)
    return written


def _own_row(metrics_path: Path, report) -> dict:
    row = pd.read_csv(_require_file(metrics_path, "Metrics file")).iloc[0]
    return {
        "name": "this run",
        "sen": row["sen"],
        "auc": row["auc"],
        "fpr": row["fpr"],
        "adds": report.adds,
        "muls": report.muls,
        "mem": report.memory_bits,
    }


def cmd_opcount(args: argparse.Namespace, config: RunConfig) -> list[Path]:
    """Static operation and memory counts in both execution modes, plus the comparison table."""
    if args.spec is not None:
        spec = load_network_spec(_require_file(args.spec, "Network spec"))
    else:
        spec = _network_spec(config, _window_shape(config))
    options = config.complexity.model_dump()
    reports = {
        mode: static_op_counts(
            spec,
            mode,
            time_steps=config.encoder.time_steps,
            leak=config.neuron.leak,
            pool_mode=config.neuron.pool_mode.value,
            **options,
        )
        for mode in CountMode
    }
    output_dir = Path(args.output_dir)
    text_path, json_path, table_path = (
        output_dir / "opcount.txt",
        output_dir / "opcount.json",
        output_dir / "comparison.csv",
    )
    with atomic_write(text_path, mode="w") as f:
        for mode, report in reports.items():
            f.writelines(f"{mode.value}.{line}\n" for line in report.to_key_value().splitlines())
    with atomic_write(json_path, mode="w") as f:
        json.dump({mode.value: report.model_dump(mode="json") for mode, report in reports.items()}, f, indent=2)
        f.write("\n")

    own = _own_row(Path(args.metrics), reports[CountMode.SNN]) if args.metrics is not None else None
    table = reference_comparison([work.model_dump() for work in config.reference_works], own=own)
    with atomic_write(table_path, mode="w") as f:
        table.to_csv(f, index=False, lineterminator="\n")
    snn = reports[CountMode.SNN]
    if snn.reduction_percent is not None:
        logger.info("Time complexity reduced by %.2f%% at T=%d", snn.reduction_percent, snn.time_steps)
    return [text_path, json_path, table_path]


def cmd_export_nwb(args: argparse.Namespace, config: RunConfig) -> list[Path]:
    """Write a recording, its interval plan and seizure events to NWB."""
    recording_to_nwb(
        edf_file_path=args.edf,
        annotations_file_path=args.annotations,
        nwbfile_path=args.output,
        params=config.intervals,
        subject_id=args.subject_id,
        metadata_file_path=args.metadata,
        stub_test=args.stub_test,
    )
    return [Path(args.output)]


COMMANDS = {
    "synth": cmd_synth,
    "windows": cmd_windows,
    "train": cmd_train,
    "convert": cmd_convert,
    "infer": cmd_infer,
    "evaluate": cmd_evaluate,
    "opcount": cmd_opcount,
    "export-nwb": cmd_export_nwb,
}


class _ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as ConfigError so that main() owns every exit code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _lookup(defaults: dict, key: str):
    value = defaults
    for part in key.split("."):
        value = value[part]
    return value


def _setting(parser: argparse.ArgumentParser, flag: str, key: str, defaults: dict, help: str, **kwargs):
    """A flag that overrides the configuration entry ``key``; its help shows the built-in default."""
    parser.add_argument(
        flag, dest=key, default=argparse.SUPPRESS, help=f"{help} (default: {_lookup(defaults, key)})", **kwargs
    )


def _float_or_none(text: str) -> Optional[float]:
    return None if text.lower() in ("none", "null") else float(text)


def build_parser() -> argparse.ArgumentParser:
    defaults = load_default_config()

    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="YAML or JSON file overriding the built-in defaults")
    common.add_argument(
        "--seed", dest="seed", type=int, default=argparse.SUPPRESS, help=f"global seed (default: {defaults['seed']})"
    )
    common.add_argument("--verbose", action="store_true", help="debug logging and progress bars")
    common.add_argument(
        "--print-config", action="store_true", help="print the resolved configuration as YAML and exit"
    )

    encoder = _ArgumentParser(add_help=False)
    _setting(encoder, "--time-steps", "encoder.time_steps", defaults, "spike train length T", type=int)
    _setting(encoder, "--v-th-up", "encoder.v_th_up", defaults, "upper encoder threshold in microvolts", type=float)
    _setting(encoder, "--v-th-down", "encoder.v_th_down", defaults, "lower encoder threshold in microvolts", type=float)
    _setting(encoder, "--sigma", "encoder.sigma", defaults, "Gaussian standard deviation", type=_float_or_none)

    intervals = _ArgumentParser(add_help=False)
    _setting(intervals, "--pil-s", "intervals.pil_s", defaults, "preictal interval length in seconds", type=float)
    _setting(intervals, "--sph-s", "intervals.sph_s", defaults, "seizure prediction horizon in seconds", type=float)
    _setting(intervals, "--lead-gap-s", "intervals.lead_gap_s", defaults, "gap before a lead seizure", type=float)

    neuron = _ArgumentParser(add_help=False)
    _setting(neuron, "--v-th", "neuron.v_th", defaults, "initial IF threshold", type=float)
    _setting(neuron, "--leak", "neuron.leak", defaults, "IF leak per step", type=float)
    _setting(
        neuron, "--reset-mode", "neuron.reset_mode", defaults, "IF reset", choices=[mode.value for mode in ResetMode]
    )
    _setting(
        neuron, "--pool-mode", "neuron.pool_mode", defaults, "spiking max pool", choices=[m.value for m in PoolMode]
    )

    parser = _ArgumentParser(prog="spiking-seizure", description=__doc__.splitlines()[0])
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_ArgumentParser)
    subparsers.required = True

    synth = subparsers.add_parser("synth", parents=[common, intervals], help=cmd_synth.__doc__)
    synth.add_argument("--output-dir", type=Path, required=True)
    _setting(synth, "--duration-s", "synth.duration_s", defaults, "recording length in seconds", type=float)
    _setting(synth, "--channels", "synth.channels", defaults, "number of EEG channels", type=int)
    _setting(synth, "--sample-rate", "synth.sample_rate", defaults, "sampling rate in Hz", type=int)
    _setting(synth, "--recording-id", "synth.recording_id", defaults, "recording id and file stem")

    windows = subparsers.add_parser("windows", parents=[common, intervals], help=cmd_windows.__doc__)
    windows.add_argument("--edf", type=Path, required=True)
    windows.add_argument("--annotations", type=Path, required=True)
    windows.add_argument("--output-dir", type=Path, required=True)
    _setting(windows, "--window-s", "windows.window_s", defaults, "window length in seconds", type=float)
    _setting(windows, "--preictal-stride-s", "windows.preictal_stride_s", defaults, "preictal stride", type=float)
    _setting(
        windows,
        "--interictal-stride-s",
        "windows.interictal_stride_s",
        defaults,
        "interictal stride",
        type=_float_or_none,
    )
    _setting(windows, "--train-ratio", "windows.train_ratio", defaults, "train:test ratio", type=int, nargs=2)

    train = subparsers.add_parser("train", parents=[common, encoder], help=cmd_train.__doc__)
    train.add_argument("--train", type=Path, required=True, help="EEGW training windows")
    train.add_argument("--test", type=Path, default=None, help="EEGW windows scored after training")
    train.add_argument("--output", type=Path, required=True, help="SCNW weight file")
    train.add_argument("--spec-output", type=Path, default=None, help="network JSON (default: next to the weights)")
    _setting(train, "--lr", "training.lr", defaults, "learning rate", type=float)
    _setting(train, "--epochs", "training.epochs", defaults, "training epochs", type=int)
    _setting(train, "--batch", "training.batch", defaults, "mini-batch size", type=int)

    convert = subparsers.add_parser("convert", parents=[common, encoder, neuron], help=cmd_convert.__doc__)
    convert.add_argument("--weights", type=Path, required=True, help="SCNW weight file")
    convert.add_argument("--spec", type=Path, default=None, help="network JSON (default: next to the weights)")
    convert.add_argument("--calibration-windows", type=Path, default=None, help="EEGW windows for calibration")
    convert.add_argument("--output", type=Path, required=True, help="spiking model file")
    _setting(convert, "--percentile", "calibration.percentile", defaults, "threshold percentile", type=float)
    _setting(
        convert,
        "--statistic",
        "calibration.statistic",
        defaults,
        "per-neuron input statistic: single-step peak or time average",
        choices=["max", "mean"],
    )
    _setting(convert, "--max-samples", "calibration.max_samples", defaults, "calibration windows used", type=int)
    _setting(convert, "--grid", "calibration.grid", defaults, "threshold grid", type=float, nargs="*")
    convert.add_argument(
        "--no-calibrate",
        dest="calibration.enabled",
        action="store_false",
        default=argparse.SUPPRESS,
        help=f"keep the initial thresholds (default: calibrate={defaults['calibration']['enabled']})",
    )

    infer = subparsers.add_parser("infer", parents=[common, encoder], help=cmd_infer.__doc__)
    infer.add_argument("--model", type=Path, required=True, help="spiking model file")
    infer.add_argument("--windows", type=Path, required=True, help="EEGW windows")
    infer.add_argument("--output", type=Path, required=True, help="prediction CSV")
    _setting(infer, "--count-threshold", "inference.count_threshold", defaults, "decision margin", type=int)
    _setting(infer, "--max-workers", "inference.max_workers", defaults, "worker processes", type=int)

    evaluate = subparsers.add_parser("evaluate", parents=[common, encoder], help=cmd_evaluate.__doc__)
    evaluate.add_argument("--predictions", type=Path, required=True, help="prediction CSV")
    evaluate.add_argument("--output-dir", type=Path, required=True)
    evaluate.add_argument("--model", type=Path, default=None, help="spiking model for the time-step sweep")
    evaluate.add_argument("--windows", type=Path, default=None, help="EEGW windows for the time-step sweep")
    _setting(evaluate, "--count-threshold", "inference.count_threshold", defaults, "decision margin", type=int)
    _setting(evaluate, "--thresholds", "evaluation.thresholds", defaults, "sweep thresholds", type=int, nargs="+")
    _setting(evaluate, "--time-step-sweep", "evaluation.time_step_sweep", defaults, "T values", type=int, nargs="+")
    _setting(evaluate, "--window-s", "windows.window_s", defaults, "window length for FPR/h", type=float)

    opcount = subparsers.add_parser("opcount", parents=[common, neuron], help=cmd_opcount.__doc__)
    opcount.add_argument("--spec", type=Path, default=None, help="network JSON (default: built from the config)")
    opcount.add_argument("--metrics", type=Path, default=None, help="metrics.csv adding this run to the comparison")
    opcount.add_argument("--output-dir", type=Path, required=True)
    _setting(opcount, "--time-steps", "encoder.time_steps", defaults, "spike train length T", type=int)

    export = subparsers.add_parser("export-nwb", parents=[common, intervals], help=cmd_export_nwb.__doc__)
    export.add_argument("--edf", type=Path, required=True)
    export.add_argument("--annotations", type=Path, required=True)
    export.add_argument("--output", type=Path, required=True, help="NWB file")
    export.add_argument("--subject-id", default=None)
    export.add_argument("--metadata", type=Path, default=None, help="YAML merged over the bundled NWB metadata")
    export.add_argument("--stub-test", action="store_true", help="write only the first 10 s of EEG")
    return parser


def _configure_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
    except SystemExit as exception:
        return int(exception.code or 0)
    except ConfigError as exception:
        print(f"spiking-seizure: error: {exception}", file=sys.stderr)
        return EXIT_USAGE

    _configure_logging(args.verbose)
    overrides = {key: value for key, value in vars(args).items() if "." in key or key == "seed"}
    try:
        config = resolve_config(args.config, overrides)
        if args.print_config:
            sys.stdout.write(yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False))
            return EXIT_OK
        for path in COMMANDS[args.command](args, config):
            logger.debug("wrote %s", path)
    except DivergenceError as exception:
        logger.error("%s", exception)
        return EXIT_DIVERGENCE
    except (ConfigError, ValidationError) as exception:
        logger.error("%s", exception)
        return EXIT_USAGE
    except (SpikingSeizureError, FileNotFoundError) as exception:
        logger.error("%s", exception)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
