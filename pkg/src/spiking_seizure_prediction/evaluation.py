"""Classification metrics, ROC/AUC and the count-threshold sweep.

The positive class is preictal. Ratios with an empty denominator are NaN and carry a
reason in ``Metrics.undefined`` rather than a silent zero.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .conversion import SnnModel
from .snn_engine import SpikeCounts, decide, run_network_batch
from .spike_encoder import EncoderConfig, encode_batch
from .utils.errors import InputError, StructuralError
from .utils.utils import Label, atomic_write

SWEEP_COLUMNS = ["threshold", "acc", "sen", "fpr"]
SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fn: int = 0
    tn: int = 0
    fp: int = 0

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    @property
    def total(self) -> int:
        return self.positives + self.negatives


@dataclass(frozen=True)
class Metrics:
    acc: float
    sen: float
    specificity: float
    fpr: float
    undefined: dict[str, str] = field(default_factory=dict)

    def as_dict(self) -> dict[str, float]:
        return {"acc": self.acc, "sen": self.sen, "specificity": self.specificity, "fpr": self.fpr}


@dataclass(frozen=True)
class RocCurve:
    """ROC points from the strictest to the loosest threshold, (0, 0) first."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray


def _as_labels(values: Sequence[int], name: str) -> np.ndarray:
    array = np.asarray([int(value) for value in values], dtype=np.int64)
    if not np.isin(array, (Label.INTERICTAL, Label.PREICTAL)).all():
        raise InputError(f"{name} must be 0 (interictal) or 1 (preictal)")
    return array


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> ConfusionCounts:
    predictions = _as_labels(predictions, "predictions")
    labels = _as_labels(labels, "labels")
    if predictions.shape != labels.shape:
        raise StructuralError(f"{len(predictions)} predictions but {len(labels)} labels")
    positive = labels == Label.PREICTAL
    predicted = predictions == Label.PREICTAL
    return ConfusionCounts(
        tp=int((positive & predicted).sum()),
        fn=int((positive & ~predicted).sum()),
        tn=int((~positive & ~predicted).sum()),
        fp=int((~positive & predicted).sum()),
    )


def metrics(counts: ConfusionCounts) -> Metrics:
    """Accuracy, sensitivity, specificity and false positive rate of a confusion matrix."""
    undefined = {}

    def ratio(name: str, numerator: int, denominator: int, reason: str) -> float:
        if denominator == 0:
            undefined[name] = reason
            return math.nan
        return numerator / denominator

    acc = ratio("acc", counts.tp + counts.tn, counts.total, "no samples")
    sen = ratio("sen", counts.tp, counts.positives, "no preictal samples")
    specificity = ratio("specificity", counts.tn, counts.negatives, "no interictal samples")
    fpr = ratio("fpr", counts.fp, counts.negatives, "no interictal samples")
    return Metrics(acc=acc, sen=sen, specificity=specificity, fpr=fpr, undefined=undefined)


def fpr_per_hour(false_alarm_count: int, monitored_duration_s: float) -> float:
    """False alarms per hour of monitoring."""
    if not monitored_duration_s > 0:
        raise InputError(f"Monitored duration must be positive, got {monitored_duration_s}")
    if false_alarm_count < 0:
        raise InputError(f"False alarm count must be non-negative, got {false_alarm_count}")
    return false_alarm_count * SECONDS_PER_HOUR / monitored_duration_s


def roc(scores: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """ROC over all distinct score thresholds, descending; tied scores form a single step."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _as_labels(labels, "labels")
    if scores.shape != labels.shape:
        raise StructuralError(f"{len(scores)} scores but {len(labels)} labels")
    n_positive = int((labels == Label.PREICTAL).sum())
    n_negative = len(labels) - n_positive
    if n_positive == 0 or n_negative == 0:
        raise InputError("ROC needs both preictal and interictal samples")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    hits = (labels[order] == Label.PREICTAL).astype(np.int64)
    # last index of every run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(sorted_scores)), len(scores) - 1]
    tps = np.cumsum(hits)[ends]
    fps = ends + 1 - tps
    return RocCurve(
        fpr=np.r_[0.0, fps / n_negative],
        tpr=np.r_[0.0, tps / n_positive],
        thresholds=np.r_[np.inf, sorted_scores[ends]],
    )


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    return float(np.sum(np.diff(curve.fpr) * (curve.tpr[1:] + curve.tpr[:-1]) / 2.0))


def threshold_sweep(
    counts_per_sample: Sequence[SpikeCounts],
    labels: Sequence[int],
    thresholds: Sequence[int] = (0, 1, 2, 3, 4),
    inclusive: bool = False,
) -> pd.DataFrame:
    """Metrics of the count decision at each margin threshold (columns threshold, acc, sen, fpr)."""
    rows = []
    for threshold in thresholds:
        predictions = [int(decide(counts, threshold, inclusive=inclusive)) for counts in counts_per_sample]
        result = metrics(confusion(predictions, labels))
        rows.append({"threshold": int(threshold), "acc": result.acc, "sen": result.sen, "fpr": result.fpr})
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def mean_metrics(results: Sequence[Metrics]) -> Metrics:
    """Simple mean over runs or subjects, ignoring undefined values."""
    if not results:
        raise InputError("No metrics to average")
    means, undefined = {}, {}
    for name in ("acc", "sen", "specificity", "fpr"):
        values = np.array([getattr(result, name) for result in results], dtype=np.float64)
        if np.isnan(values).all():
            means[name] = math.nan
            undefined[name] = "undefined in every run"
        else:
            means[name] = float(np.nanmean(values))
    return Metrics(**means, undefined=undefined)


def accuracy_by_time_step(
    model: SnnModel,
    samples: np.ndarray,
    labels: Sequence[int],
    encoder: EncoderConfig,
    time_steps: Sequence[int],
    count_threshold: int = 0,
    batch: int = 32,
) -> pd.DataFrame:
    """Spiking accuracy as a function of the spike train length.

    Trains are encoded once at the longest length; since each step's draw depends only on
    the seed and the step index, the first ``T`` steps are exactly the length-``T`` train.
    """
    if not time_steps:
        raise InputError("No time steps to evaluate")
    longest = encoder.model_copy(update={"time_steps": int(max(time_steps))})
    bits = np.stack([train.bits for train in encode_batch(list(samples), longest)])
    labels = _as_labels(labels, "labels")
    rows = []
    for steps in time_steps:
        predictions = []
        for start in range(0, len(bits), batch):
            run = run_network_batch(
                model.spec, model.weights, bits[start : start + batch, :steps], model.if_cfgs, model.pool_mode
            )
            predictions.extend(int(decide(counts, count_threshold)) for counts in run.spike_counts())
        rows.append({"time_steps": int(steps), "acc": metrics(confusion(predictions, labels)).acc})
    return pd.DataFrame(rows, columns=["time_steps", "acc"])


def _write_frame(frame: pd.DataFrame, file_path: str | Path):
    with atomic_write(file_path, mode="w") as f:
        frame.to_csv(f, index=False, lineterminator="\n")


def write_sweep_csv(sweep: pd.DataFrame, file_path: str | Path):
    _write_frame(sweep[SWEEP_COLUMNS], file_path)


def write_roc_csv(curve: RocCurve, file_path: str | Path):
    _write_frame(pd.DataFrame({"fpr": curve.fpr, "tpr": curve.tpr}), file_path)


def write_metrics_csv(
    result: Metrics, file_path: str | Path, auc_value: Optional[float] = None, extra: Optional[dict] = None
):
    """One-row metrics table; reasons for undefined values go to the ``notes`` column."""
    row = {**result.as_dict(), "auc": math.nan if auc_value is None else auc_value, **(extra or {})}
    row["notes"] = "; ".join(f"{name}: {reason}" for name, reason in sorted(result.undefined.items()))
    _write_frame(pd.DataFrame([row]), file_path)
