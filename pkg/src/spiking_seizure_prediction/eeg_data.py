"""EEG recordings, seizure annotations, interval labelling, windowing and a synthetic generator."""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.signal import butter, sosfiltfilt

from .tools.edf import read_edf_file, write_edf_file
from .tools.tensor_files import read_window_file, write_window_file
from .utils.errors import FormatError, InputError
from .utils.utils import Label, atomic_write

logger = logging.getLogger(__name__)

Interval = tuple[float, float]


@dataclass(frozen=True)
class EegRecording:
    """Multichannel EEG in microvolts, shape [channels, N]."""

    samples: np.ndarray
    sample_rate: float
    recording_id: str = "recording"
    channel_names: Optional[list[str]] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise InputError(f"EEG samples must be a [channels, N] matrix, got shape {samples.shape}")
        if not self.sample_rate > 0:
            raise InputError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.isfinite(samples).all():
            raise InputError("EEG samples must be finite")
        names = self.channel_names or [f"EEG {index + 1}" for index in range(samples.shape[0])]
        if len(names) != samples.shape[0]:
            raise InputError(f"{samples.shape[0]} channels but {len(names)} channel names")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channel_names", list(names))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate


@dataclass(frozen=True)
class SeizureAnnotations:
    """Sorted, non-overlapping (onset_s, offset_s) pairs."""

    seizures: tuple[Interval, ...] = ()

    def __post_init__(self):
        seizures = sorted((float(onset), float(offset)) for onset, offset in self.seizures)
        for onset, offset in seizures:
            if not onset < offset:
                raise InputError(f"Seizure onset {onset} must precede its offset {offset}")
            if onset < 0:
                raise InputError(f"Seizure onset {onset} lies before the recording start")
        for (_, previous_offset), (onset, _) in zip(seizures, seizures[1:]):
            if onset < previous_offset:
                raise InputError(f"Seizures overlap: one ends at {previous_offset}, the next starts at {onset}")
        object.__setattr__(self, "seizures", tuple(seizures))

    def __len__(self) -> int:
        return len(self.seizures)

    @property
    def onsets(self) -> list[float]:
        return [onset for onset, _ in self.seizures]

    @property
    def offsets(self) -> list[float]:
        return [offset for _, offset in self.seizures]


class IntervalParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    pil_s: float = Field(default=1800.0, gt=0.0)
    sph_s: float = Field(default=300.0, ge=0.0)
    lead_gap_s: float = Field(default=14400.0, ge=0.0)


@dataclass(frozen=True)
class IntervalPlan:
    """Disjoint preictal, interictal and excluded intervals covering a recording."""

    duration_s: float
    params: IntervalParams
    preictal: list[Interval] = field(default_factory=list)
    interictal: list[Interval] = field(default_factory=list)
    excluded: list[Interval] = field(default_factory=list)
    lead_seizures: list[int] = field(default_factory=list)

    def rows(self) -> list[tuple[float, float, str]]:
        """(start, stop, state) rows sorted by start time."""
        rows = [(start, stop, "preictal") for start, stop in self.preictal]
        rows += [(start, stop, "interictal") for start, stop in self.interictal]
        rows += [(start, stop, "excluded") for start, stop in self.excluded]
        return sorted(rows)


@dataclass(frozen=True)
class WindowSample:
    """One [1, channels, width] window cut from a recording."""

    matrix: np.ndarray
    label: Label
    recording_id: str
    start_s: float


def _merge(intervals: Sequence[Interval]) -> list[Interval]:
    merged = []
    for start, stop in sorted(interval for interval in intervals if interval[1] > interval[0]):
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], stop))
        else:
            merged.append((start, stop))
    return merged


def _subtract(intervals: Sequence[Interval], removed: Sequence[Interval]) -> list[Interval]:
    result = []
    removed = _merge(removed)
    for start, stop in _merge(intervals):
        cursor = start
        for r_start, r_stop in removed:
            if r_stop <= cursor or r_start >= stop:
                continue
            if r_start > cursor:
                result.append((cursor, r_start))
            cursor = max(cursor, r_stop)
        if cursor < stop:
            result.append((cursor, stop))
    return result


def label_intervals(annotations: SeizureAnnotations, duration_s: float, params: IntervalParams) -> IntervalPlan:
    """Partition a recording into preictal, interictal and excluded time.

    Only lead seizures (the first one, or one starting at least ``lead_gap_s`` after the
    previous seizure ended) get a preictal interval ``[onset - sph - pil, onset - sph]``.
    Interictal time keeps ``lead_gap_s`` away from every seizure in both directions; every
    seizure with its SPH before and its post-ictal SPH after is excluded, as is any time
    that ends up in neither class.
    """
    if duration_s <= 0:
        raise InputError(f"Recording duration must be positive, got {duration_s}")
    for onset, offset in annotations.seizures:
        if offset > duration_s:
            raise InputError(f"Seizure [{onset}, {offset}] extends beyond the recording ({duration_s} s)")

    whole = [(0.0, float(duration_s))]
    blocked = [(onset - params.sph_s, offset + params.sph_s) for onset, offset in annotations.seizures]
    lead, preictal = [], []
    previous_offset = None
    for index, (onset, offset) in enumerate(annotations.seizures):
        if previous_offset is None or onset - previous_offset >= params.lead_gap_s:
            lead.append(index)
            preictal.append((onset - params.sph_s - params.pil_s, onset - params.sph_s))
        previous_offset = offset
    preictal = _subtract(_subtract(preictal, blocked), _subtract([(-math.inf, math.inf)], whole))
    neighbourhoods = [(onset - params.lead_gap_s, offset + params.lead_gap_s) for onset, offset in annotations.seizures]
    interictal = _subtract(whole, neighbourhoods + preictal)
    excluded = _subtract(whole, preictal + interictal)
    return IntervalPlan(
        duration_s=float(duration_s),
        params=params,
        preictal=preictal,
        interictal=interictal,
        excluded=excluded,
        lead_seizures=lead,
    )


def window_count(length: int, window: int, stride: int) -> int:
    """Number of windows of ``window`` samples at ``stride`` that fit ``length`` samples."""
    return (length - window) // stride + 1 if length >= window else 0


def _to_samples(seconds: float, sample_rate: float, name: str) -> int:
    count = int(round(seconds * sample_rate))
    if count < 1:
        raise InputError(f"{name} of {seconds} s is shorter than one sample at {sample_rate} Hz")
    return count


def extract_windows(
    recording: EegRecording,
    plan: IntervalPlan,
    window_s: float = 20.0,
    preictal_stride_s: float = 15.0,
    interictal_stride_s: Optional[float] = None,
) -> list[WindowSample]:
    """Cut fixed-length windows from every labelled interval.

    Preictal windows advance by ``preictal_stride_s`` (overlapping when shorter than the
    window), interictal windows by ``interictal_stride_s`` (default: the window length).
    Windows never cross an interval boundary.
    """
    rate = recording.sample_rate
    width = _to_samples(window_s, rate, "window")
    interictal_stride_s = window_s if interictal_stride_s is None else interictal_stride_s
    strides = {
        Label.PREICTAL: _to_samples(preictal_stride_s, rate, "preictal stride"),
        Label.INTERICTAL: _to_samples(interictal_stride_s, rate, "interictal stride"),
    }
    windows = []
    for label, intervals in ((Label.PREICTAL, plan.preictal), (Label.INTERICTAL, plan.interictal)):
        stride = strides[label]
        for start, stop in intervals:
            first = math.ceil(start * rate - 1e-9)
            last = min(math.floor(stop * rate + 1e-9), recording.n_samples)
            for k in range(window_count(last - first, width, stride)):
                offset = first + k * stride
                matrix = recording.samples[np.newaxis, :, offset : offset + width].astype(np.float32)
                windows.append(WindowSample(matrix, label, recording.recording_id, offset / rate))
    logger.info(
        "%s: %d preictal and %d interictal windows",
        recording.recording_id,
        sum(sample.label is Label.PREICTAL for sample in windows),
        sum(sample.label is Label.INTERICTAL for sample in windows),
    )
    return windows


def _allocate(class_sizes: dict[int, int], n_train: int, fraction: float) -> dict[int, int]:
    """Largest-remainder allocation of ``n_train`` across classes, each class kept on both sides when possible."""
    quotas = {label: fraction * size for label, size in class_sizes.items()}
    allocation = {label: math.floor(quota) for label, quota in quotas.items()}
    by_remainder = sorted(class_sizes, key=lambda label: (-(quotas[label] - allocation[label]), label))
    for label in by_remainder[: n_train - sum(allocation.values())]:
        allocation[label] += 1
    for label, size in class_sizes.items():
        if size < 2:
            continue
        if allocation[label] == 0:
            donors = [other for other in class_sizes if other != label and allocation[other] > 1]
            if donors:
                donor = max(donors, key=lambda other: allocation[other])
                allocation[donor] -= 1
                allocation[label] += 1
        elif allocation[label] == size:
            takers = [other for other in class_sizes if other != label and allocation[other] < class_sizes[other] - 1]
            if takers:
                taker = max(takers, key=lambda other: class_sizes[other] - allocation[other])
                allocation[taker] += 1
                allocation[label] -= 1
    return allocation


def split_train_test(
    samples: Sequence[WindowSample], ratio: Sequence[int] = (4, 1), seed: int = 0
) -> tuple[list[WindowSample], list[WindowSample]]:
    """Seeded, label-stratified split with ``round(n * train_share)`` training samples."""
    if len(samples) == 0:
        raise InputError("Cannot split an empty sample list")
    if len(ratio) != 2 or min(ratio) < 0 or sum(ratio) == 0:
        raise InputError(f"ratio must be two non-negative integers with a positive sum, got {ratio}")
    fraction = ratio[0] / (ratio[0] + ratio[1])
    n_train = math.floor(fraction * len(samples) + 0.5)
    labels = np.array([int(sample.label) for sample in samples])
    class_sizes = {int(label): int((labels == label).sum()) for label in np.unique(labels)}
    allocation = _allocate(class_sizes, n_train, fraction)

    rng = np.random.default_rng(seed)
    train_indices, test_indices = [], []
    for label in sorted(class_sizes):
        members = rng.permutation(np.flatnonzero(labels == label))
        train_indices.extend(members[: allocation[label]])
        test_indices.extend(members[allocation[label] :])
    train = [samples[index] for index in rng.permutation(train_indices)] if train_indices else []
    test = [samples[index] for index in rng.permutation(test_indices)] if test_indices else []
    return train, test


class SynthSeizure(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    onset_s: float = Field(ge=0.0)
    duration_s: float = Field(gt=0.0)


class SynthConfig(BaseModel):
    """Parameters of the synthetic EEG generator; amplitudes in microvolts."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    recording_id: str = "synth-001"
    duration_s: float = Field(default=21600.0, gt=0.0)
    channels: int = Field(default=4, ge=1)
    sample_rate: int = Field(default=64, ge=1)
    noise_amplitude_uv: float = Field(default=20.0, ge=0.0)
    band_hz: tuple[float, float] = (0.5, 30.0)
    burst_frequency_hz: float = Field(default=6.0, gt=0.0)
    burst_amplitude_uv: float = Field(default=40.0, ge=0.0)
    burst_duration_s: float = Field(default=2.0, gt=0.0)
    burst_rate_hz: float = Field(default=0.25, gt=0.0)
    ictal_frequency_hz: float = Field(default=3.0, gt=0.0)
    ictal_amplitude_uv: float = Field(default=150.0, ge=0.0)
    seizures: list[SynthSeizure] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self) -> "SynthConfig":
        if not float(self.duration_s * self.sample_rate).is_integer():
            raise ValueError("duration_s * sample_rate must be a whole number of samples")
        low, high = self.band_hz
        if not 0 < low < high < self.sample_rate / 2:
            raise ValueError(f"band_hz must satisfy 0 < low < high < {self.sample_rate / 2}, got {self.band_hz}")
        for seizure in self.seizures:
            if seizure.onset_s + seizure.duration_s > self.duration_s:
                raise ValueError(f"Seizure at {seizure.onset_s} s does not end within the recording")
        return self


def _burst_envelope(n_samples: int, sample_rate: float, cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Sum of Hann-shaped bursts starting at Poisson times."""
    envelope = np.zeros(n_samples)
    width = max(int(round(cfg.burst_duration_s * sample_rate)), 1)
    shape = np.hanning(width) if width > 2 else np.ones(width)
    n_bursts = rng.poisson(cfg.burst_rate_hz * n_samples / sample_rate)
    for start in np.sort(rng.integers(0, max(n_samples - width, 0) + 1, size=n_bursts)):
        stop = min(start + width, n_samples)
        envelope[start:stop] = np.maximum(envelope[start:stop], shape[: stop - start])
    return envelope


def synth_generate(
    cfg: SynthConfig, seed: int, params: Optional[IntervalParams] = None
) -> tuple[EegRecording, SeizureAnnotations]:
    """Generate a deterministic recording whose preictal intervals carry sinusoidal bursts.

    The background is Gaussian noise band-limited to ``band_hz`` and scaled to
    ``noise_amplitude_uv`` standard deviation; seizures carry a rhythmic discharge.
    """
    params = params if params is not None else IntervalParams()
    rng = np.random.default_rng(seed)
    rate = cfg.sample_rate
    n_samples = int(round(cfg.duration_s * rate))
    time = np.arange(n_samples) / rate

    sos = butter(4, cfg.band_hz, btype="bandpass", fs=rate, output="sos")
    noise = sosfiltfilt(sos, rng.standard_normal((cfg.channels, n_samples)), axis=-1)
    noise /= noise.std(axis=-1, keepdims=True)
    samples = cfg.noise_amplitude_uv * noise

    annotations = SeizureAnnotations(tuple((s.onset_s, s.onset_s + s.duration_s) for s in cfg.seizures))
    plan = label_intervals(annotations, cfg.duration_s, params)
    for start, stop in plan.preictal:
        first, last = int(math.ceil(start * rate)), int(math.floor(stop * rate))
        if last <= first:
            continue
        for channel in range(cfg.channels):
            phase = rng.uniform(0, 2 * np.pi)
            envelope = _burst_envelope(last - first, rate, cfg, rng)
            wave = np.sin(2 * np.pi * cfg.burst_frequency_hz * time[first:last] + phase)
            samples[channel, first:last] += cfg.burst_amplitude_uv * envelope * wave
    for onset, offset in annotations.seizures:
        first, last = int(math.ceil(onset * rate)), int(math.floor(offset * rate))
        phases = rng.uniform(0, 2 * np.pi, size=(cfg.channels, 1))
        samples[:, first:last] += cfg.ictal_amplitude_uv * np.sin(
            2 * np.pi * cfg.ictal_frequency_hz * time[np.newaxis, first:last] + phases
        )
    recording = EegRecording(samples=samples, sample_rate=float(rate), recording_id=cfg.recording_id)
    return recording, annotations


def read_edf(file_path: str | Path, recording_id: Optional[str] = None) -> EegRecording:
    """Load a continuous EDF file as a recording in its physical units."""
    contents = read_edf_file(file_path)
    return EegRecording(
        samples=contents.signals,
        sample_rate=contents.sample_rate,
        recording_id=recording_id or Path(file_path).stem,
        channel_names=contents.labels,
    )


def write_edf(recording: EegRecording, file_path: str | Path):
    """Write a recording as EDF with 1 s records; the sample rate must be a whole number."""
    write_edf_file(file_path, recording.samples, recording.sample_rate, labels=recording.channel_names)


ANNOTATION_COLUMNS = ["onset_s", "offset_s"]


def read_annotations_csv(file_path: str | Path) -> SeizureAnnotations:
    """Parse an ``onset_s,offset_s`` CSV; errors name the offending line."""
    try:
        table = pd.read_csv(file_path, dtype=str, skipinitialspace=True, keep_default_na=False)
    except pd.errors.EmptyDataError as exception:
        raise FormatError(f"Annotation file {file_path} is empty; expected header 'onset_s,offset_s'") from exception
    except pd.errors.ParserError as exception:
        raise FormatError(f"Annotation file {file_path} is not valid CSV: {exception}") from exception
    if list(table.columns) != ANNOTATION_COLUMNS:
        raise FormatError(f"Annotation header must be 'onset_s,offset_s', got {','.join(table.columns)!r}")
    seizures = []
    for row, (onset, offset) in enumerate(table.itertuples(index=False, name=None)):
        line = row + 2
        try:
            seizures.append((float(onset), float(offset)))
        except ValueError as exception:
            raise FormatError(f"Line {line} of {file_path}: cannot parse {onset!r},{offset!r}") from exception
        if not math.isfinite(seizures[-1][0]) or not math.isfinite(seizures[-1][1]):
            raise FormatError(f"Line {line} of {file_path}: non-finite time")
    return SeizureAnnotations(tuple(seizures))


def write_annotations_csv(annotations: SeizureAnnotations, file_path: str | Path):
    table = pd.DataFrame(list(annotations.seizures), columns=ANNOTATION_COLUMNS)
    with atomic_write(file_path, mode="w") as f:
        table.to_csv(f, index=False, lineterminator="\n")


def save_windows(samples: Sequence[WindowSample], file_path: str | Path):
    """Write window matrices and labels as an EEGW batch."""
    if not samples:
        raise InputError("No windows to save")
    matrices = np.stack([sample.matrix for sample in samples])
    labels = np.array([int(sample.label) for sample in samples])
    write_window_file(file_path, matrices, labels)


def load_windows(file_path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read an EEGW batch as (float32 [N, 1, channels, width] matrices, int labels)."""
    matrices, labels = read_window_file(file_path)
    return matrices, labels.astype(np.int64)
