"""Reader and writer for continuous EDF files with equally sampled signals.

The fixed header is 256 ASCII bytes followed by 256 bytes per signal; data records hold,
for every signal in turn, its samples as little-endian 16-bit two's-complement integers.
"""
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..utils.errors import FormatError, UnsupportedFeatureError
from ..utils.utils import atomic_write

FIXED_HEADER_BYTES = 256
SIGNAL_HEADER_BYTES = 256
DIGITAL_MIN = -32768
DIGITAL_MAX = 32767
ANNOTATION_LABEL = "EDF Annotations"

# (name, width) of the per-signal header fields, stored field by field for all signals
_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("units", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefilter", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)


@dataclass
class EdfContents:
    labels: list[str]
    units: list[str]
    sample_rate: float
    signals: np.ndarray  # [signals, samples], physical units
    start_date: str = ""
    start_time: str = ""


class _FieldReader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def text(self, width: int, name: str) -> str:
        end = self.offset + width
        if end > len(self.data):
            raise FormatError(
                f"Truncated EDF header: field '{name}' needs {width} bytes, only {len(self.data) - self.offset} remain",
                offset=self.offset,
            )
        raw = self.data[self.offset : end]
        self.offset = end
        try:
            return raw.decode("ascii").strip()
        except UnicodeDecodeError as exception:
            raise FormatError(f"Non-ASCII characters in EDF header field '{name}'", offset=end - width) from exception

    def number(self, width: int, name: str, kind=float):
        offset = self.offset
        text = self.text(width, name)
        try:
            return kind(text)
        except ValueError as exception:
            raise FormatError(f"EDF header field '{name}' is not a number: {text!r}", offset=offset) from exception


def read_edf_file(file_path: str | Path) -> EdfContents:
    """Parse a continuous EDF file into physical-unit signals.

    EDF+ annotation signals are skipped; discontinuous EDF+ files and signals sampled at
    different rates are rejected.
    """
    data = Path(file_path).read_bytes()
    reader = _FieldReader(data)
    version = reader.text(8, "version")
    if version != "0":
        raise FormatError(f"Unknown EDF version field {version!r}", offset=0)
    reader.text(80, "patient")
    reader.text(80, "recording")
    start_date = reader.text(8, "start date")
    start_time = reader.text(8, "start time")
    header_bytes = reader.number(8, "header bytes", int)
    reserved = reader.text(44, "reserved")
    if reserved.startswith("EDF+D"):
        raise UnsupportedFeatureError("Discontinuous EDF+ files are not supported", offset=192)
    n_records = reader.number(8, "number of records", int)
    record_duration = reader.number(8, "record duration", float)
    n_signals = reader.number(4, "number of signals", int)
    if n_signals < 1:
        raise FormatError(f"EDF file declares {n_signals} signals", offset=252)
    if header_bytes != FIXED_HEADER_BYTES + SIGNAL_HEADER_BYTES * n_signals:
        raise FormatError(
            f"EDF header size {header_bytes} does not match {n_signals} signals "
            f"({FIXED_HEADER_BYTES + SIGNAL_HEADER_BYTES * n_signals} bytes expected)",
            offset=184,
        )
    if record_duration <= 0:
        raise FormatError(f"EDF record duration must be positive, got {record_duration}", offset=244)

    fields = {}
    for name, width in _SIGNAL_FIELDS:
        if name in ("label", "transducer", "units", "prefilter", "reserved"):
            fields[name] = [reader.text(width, name) for _ in range(n_signals)]
        elif name in ("digital_min", "digital_max", "samples_per_record"):
            fields[name] = np.array([reader.number(width, name, int) for _ in range(n_signals)])
        else:
            fields[name] = np.array([reader.number(width, name, float) for _ in range(n_signals)])

    samples_per_record = fields["samples_per_record"]
    record_bytes = 2 * int(samples_per_record.sum())
    available = len(data) - header_bytes
    if n_records == -1:
        n_records = available // record_bytes
    expected = n_records * record_bytes
    if available < expected:
        raise FormatError(
            f"Truncated EDF data: expected {expected} bytes for {n_records} records, found {available}",
            offset=header_bytes,
        )

    keep = [index for index, label in enumerate(fields["label"]) if label != ANNOTATION_LABEL]
    if not keep:
        raise FormatError("EDF file contains no data signals")
    rates = {int(samples_per_record[index]) for index in keep}
    if len(rates) > 1:
        raise UnsupportedFeatureError(f"Signals sampled at different rates are not supported: {sorted(rates)}")
    n_per_record = rates.pop()

    digital = np.frombuffer(data, dtype="<i2", count=expected // 2, offset=header_bytes)
    records = digital.reshape(n_records, record_bytes // 2)
    boundaries = np.concatenate([[0], np.cumsum(samples_per_record)])
    signals = np.empty((len(keep), n_records * n_per_record))
    for row, index in enumerate(keep):
        block = records[:, boundaries[index] : boundaries[index + 1]].astype(np.float64).ravel()
        d_min, d_max = fields["digital_min"][index], fields["digital_max"][index]
        p_min, p_max = fields["physical_min"][index], fields["physical_max"][index]
        if d_max == d_min:
            raise FormatError(f"Signal {fields['label'][index]!r} has an empty digital range")
        signals[row] = (block - d_min) * (p_max - p_min) / (d_max - d_min) + p_min
    return EdfContents(
        labels=[fields["label"][index] for index in keep],
        units=[fields["units"][index] for index in keep],
        sample_rate=n_per_record / record_duration,
        signals=signals,
        start_date=start_date,
        start_time=start_time,
    )


def _field(value, width: int) -> bytes:
    text = str(value)
    if len(text) > width:
        raise FormatError(f"Value {text!r} does not fit an EDF field of {width} characters")
    return text.ljust(width).encode("ascii")


def format_number(value: float, width: int = 8) -> str:
    """Shortest decimal text of at most ``width`` characters for ``value``."""
    if float(value).is_integer() and len(str(int(value))) <= width:
        return str(int(value))
    for precision in range(width, 0, -1):
        text = f"{value:.{precision}g}"
        if len(text) <= width:
            return text
    raise FormatError(f"{value} cannot be written in {width} characters")


def write_edf_file(
    file_path: str | Path,
    signals: np.ndarray,
    sample_rate: float,
    labels: Optional[Sequence[str]] = None,
    physical_range: Optional[tuple[float, float]] = None,
    units: str = "uV",
    record_duration: float = 1.0,
    start_date: str = "01.01.00",
    start_time: str = "00.00.00",
):
    """Write [signals, samples] physical values as a continuous EDF file.

    The physical range defaults to the data range widened to whole units. Samples are
    quantized to 16 bits using the range as written in the header.
    """
    signals = np.asarray(signals, dtype=np.float64)
    if signals.ndim != 2:
        raise FormatError(f"EDF signals must be a [signals, samples] matrix, got shape {signals.shape}")
    n_signals, n_samples = signals.shape
    per_record = sample_rate * record_duration
    if not float(per_record).is_integer() or per_record < 1:
        raise FormatError(f"sample_rate * record_duration must be a positive integer, got {per_record}")
    per_record = int(per_record)
    if n_samples % per_record:
        raise FormatError(f"{n_samples} samples do not fill whole records of {per_record} samples")
    labels = list(labels) if labels is not None else [f"EEG {index + 1}" for index in range(n_signals)]

    if physical_range is None:
        physical_range = (math.floor(signals.min()) - 1, math.ceil(signals.max()) + 1)
    p_min_text, p_max_text = format_number(physical_range[0]), format_number(physical_range[1])
    p_min, p_max = float(p_min_text), float(p_max_text)
    if not p_max > p_min:
        raise FormatError(f"Physical range {physical_range} is empty")
    scaled = (signals - p_min) / (p_max - p_min) * (DIGITAL_MAX - DIGITAL_MIN) + DIGITAL_MIN
    digital = np.clip(np.round(scaled), DIGITAL_MIN, DIGITAL_MAX).astype("<i2")

    n_records = n_samples // per_record
    header = b"".join(
        [
            _field("0", 8),
            _field("X X X X", 80),
            _field("Startdate X X X X", 80),
            _field(start_date, 8),
            _field(start_time, 8),
            _field(FIXED_HEADER_BYTES + SIGNAL_HEADER_BYTES * n_signals, 8),
            _field("", 44),
            _field(n_records, 8),
            _field(format_number(record_duration), 8),
            _field(n_signals, 4),
        ]
    )
    per_signal = {
        "label": labels,
        "transducer": [""] * n_signals,
        "units": [units] * n_signals,
        "physical_min": [p_min_text] * n_signals,
        "physical_max": [p_max_text] * n_signals,
        "digital_min": [DIGITAL_MIN] * n_signals,
        "digital_max": [DIGITAL_MAX] * n_signals,
        "prefilter": [""] * n_signals,
        "samples_per_record": [per_record] * n_signals,
        "reserved": [""] * n_signals,
    }
    signal_header = b"".join(_field(value, width) for name, width in _SIGNAL_FIELDS for value in per_signal[name])
    # records: [record, signal, sample]
    payload = digital.reshape(n_signals, n_records, per_record).transpose(1, 0, 2)
    with atomic_write(file_path) as f:
        f.write(header)
        f.write(signal_header)
        f.write(np.ascontiguousarray(payload).tobytes())
